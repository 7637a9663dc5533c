#pragma once

/** @file estimation.hpp
 *  Estimating functions and fitting procedures for the semiparametric AFT
 *  model  log T_i = -Z_i' beta + eps_i  under right censoring:
 *
 *   - Gehan rank-based scores, non-smoothed ("ns") and induced-smoothed
 *     ("is");
 *   - rank-based fitting via the DF-SANE solver;
 *   - Kaplan-Meier mean-residual-life imputation of censored residuals and
 *     the Buckley-James least-squares fit built on it. The resampling engine
 *     solves target-shifted versions of these same estimating functions, so
 *     estimation and resampling share one set of roots.
 *
 *  Residual times are e_i(beta) = log X_i + Z_i' beta; on that scale the
 *  errors eps_i are i.i.d. under a correctly specified model.
 */

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "data.hpp"
#include "dfsane.hpp"
#include "errors.hpp"
#include "types.hpp"

namespace afttest {

enum class EstMethod { rr, ls };
enum class EqType { ns, is };

inline const char* to_string(EstMethod m) {
  return m == EstMethod::rr ? "rr" : "ls";
}
inline const char* to_string(EqType e) { return e == EqType::ns ? "ns" : "is"; }

/** Residual times e_i(beta) = log X_i + Z_i' beta. */
inline Vector residual_times(const Vector& beta, const SurvivalDataset& d) {
  return (d.time.array().log() + (d.covariates * beta).array()).matrix();
}

namespace detail {

/** Ascending permutation of v with ties broken by original index, so every
 *  downstream object is reproducible. */
inline std::vector<int> sort_permutation(const Vector& v) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return v[a] < v[b] || (v[a] == v[b] && a < b);
  });
  return order;
}

/** Standard normal CDF. */
inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

}  // namespace detail

/** Non-smoothed Gehan score
 *      U(beta) = n^-1 sum_i sum_j Delta_i (Z_i - Z_j) I(e_j >= e_i),
 *  evaluated in O(n log n + n p) by accumulating suffix sums over the sorted
 *  residuals (tie groups enter the suffix before their own contributions, so
 *  the >= convention is exact). */
inline Vector gehan_score_ns(const Vector& beta, const SurvivalDataset& d) {
  const Index n = d.n();
  const Index p = d.p();
  const Vector e = residual_times(beta, d);
  const std::vector<int> order = detail::sort_permutation(e);

  Vector score = Vector::Zero(p);
  double n_suffix = 0.0;                      // #{j : e_j >= group}
  Eigen::RowVectorXd z_suffix = Eigen::RowVectorXd::Zero(p);

  Index hi = n;
  while (hi > 0) {
    Index lo = hi - 1;
    while (lo > 0 && e[order[lo - 1]] == e[order[hi - 1]]) --lo;
    for (Index k = lo; k < hi; ++k) {  // admit the tie group to the risk set
      const int j = order[k];
      n_suffix += 1.0;
      z_suffix += d.covariates.row(j);
    }
    for (Index k = lo; k < hi; ++k) {
      const int i = order[k];
      if (d.status[i] == 1.0)
        score += (n_suffix * d.covariates.row(i) - z_suffix).transpose();
    }
    hi = lo;
  }
  return score / static_cast<double>(n);
}

/** Induced-smoothed Gehan score: the indicator is replaced by
 *  Phi((e_j - e_i) / r_ij) with bandwidth r_ij = ||Z_i - Z_j|| / sqrt(n).
 *  Pairs with r_ij = 0 keep the indicator convention (their covariate
 *  difference is zero, so the term vanishes either way). O(n^2 p). */
inline Vector gehan_score_is(const Vector& beta, const SurvivalDataset& d) {
  const Index n = d.n();
  const Index p = d.p();
  const Vector e = residual_times(beta, d);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  Vector score = Vector::Zero(p);
  Eigen::RowVectorXd dz(p);
  for (Index i = 0; i < n; ++i) {
    if (d.status[i] != 1.0) continue;
    for (Index j = 0; j < n; ++j) {
      dz = d.covariates.row(i) - d.covariates.row(j);
      const double r = dz.norm() * inv_sqrt_n;
      double kernel;
      if (r == 0.0)
        kernel = e[j] >= e[i] ? 1.0 : 0.0;
      else
        kernel = detail::norm_cdf((e[j] - e[i]) / r);
      score += kernel * dz.transpose();
    }
  }
  return score / static_cast<double>(n);
}

/** Kaplan-Meier mean-residual-life imputation on the residual scale. Event
 *  residuals pass through; each censored residual e is replaced by
 *      e + Area(e) / S(e),
 *  where S is the Kaplan-Meier survivor of (e, delta) over the unique
 *  residual values and Area(e) is the survival mass from e's own interval
 *  onward (backward sum of S * dt, with the open final interval closed off
 *  using the smallest observed gap). Input order is preserved. */
inline Vector imputed_residuals(const Vector& e, const Vector& delta) {
  const Index n = e.size();
  if (n == 0) throw EmptyInput();
  const std::vector<int> order = detail::sort_permutation(e);

  // Unique residual values with tied event counts and at-risk sizes.
  std::vector<double> uniq, surv, area;
  std::vector<int> events;
  {
    Index lo = 0;
    while (lo < n) {
      Index hi = lo + 1;
      while (hi < n && e[order[hi]] == e[order[lo]]) ++hi;
      int ev = 0;
      for (Index k = lo; k < hi; ++k)
        if (delta[order[k]] == 1.0) ++ev;
      uniq.push_back(e[order[lo]]);
      events.push_back(ev);
      double s = surv.empty() ? 1.0 : surv.back();
      s *= 1.0 - static_cast<double>(ev) / static_cast<double>(n - lo);
      surv.push_back(s);
      lo = hi;
    }
  }
  if (std::none_of(events.begin(), events.end(), [](int ev) { return ev > 0; }))
    throw KaplanMeierDegenerate();

  const std::size_t m = uniq.size();
  std::vector<double> dt(m, 0.0);
  if (m > 1) {
    double min_dt = uniq[1] - uniq[0];
    for (std::size_t k = 0; k + 1 < m; ++k) {
      dt[k] = uniq[k + 1] - uniq[k];
      if (dt[k] > 0.0 && dt[k] < min_dt) min_dt = dt[k];
    }
    dt[m - 1] = min_dt;  // close the open final interval
  }
  area.assign(m, 0.0);
  double cum = 0.0;
  for (std::size_t k = m; k-- > 0;) {
    cum += surv[k] * dt[k];
    area[k] = cum;
  }

  Vector e_star = e;
  for (Index i = 0; i < n; ++i) {
    if (delta[i] == 1.0) continue;
    const auto it = std::lower_bound(uniq.begin(), uniq.end(), e[i]);
    std::size_t k = it - uniq.begin();
    if (k >= m) k = m - 1;
    if (surv[k] > 1e-9) e_star[i] += area[k] / surv[k];
  }
  return e_star;
}

/** Least-squares (Buckley-James) estimating function
 *      S(beta) = n^-1 sum_i (Z_i - Zbar) e*_i(beta),
 *  with e* the imputed residuals at beta. Its root is the Buckley-James
 *  estimate; the resampling engine solves S(beta) = target. */
inline Vector ls_score(const Vector& beta, const SurvivalDataset& d) {
  const Index n = d.n();
  const Vector e = residual_times(beta, d);
  const Vector e_star = imputed_residuals(e, d.status);
  const Eigen::RowVectorXd z_bar = d.covariates.colwise().mean();
  return (d.covariates.rowwise() - z_bar).transpose() * e_star /
         static_cast<double>(n);
}

struct FitOptions {
  SolverConfig solver;
  /** Stagnated non-smoothed solutions with ||U||/sqrt(p) at or below this are
   *  accepted as converged-nonsmooth. 0 selects the scale-aware default
   *  max(1e-4, 20/n): the ns score is piecewise constant with jumps of order
   *  ||Z_i - Z_j||/n, so a fixed tolerance below the jump size would reject
   *  every realistic fit. */
  double ns_accept_tol = 0.0;
};

inline double ns_accept_tolerance(const FitOptions& opt, Index n) {
  if (opt.ns_accept_tol > 0.0) return opt.ns_accept_tol;
  return std::max(1e-4, 20.0 / static_cast<double>(n));
}

struct FitResult {
  Vector beta_hat;           ///< on the stored (possibly standardized) scale
  Vector beta_source_scale;  ///< mapped back through the scaling record
  EstMethod est_method = EstMethod::rr;
  std::optional<EqType> eq_type;  ///< rank-based fits only
  SolverResult solver;            ///< diagnostics (synthesized for ls)
  bool converged_nonsmooth = false;  ///< ns accepted via the scale-aware tol
  bool oscillated = false;           ///< ls two-cycle averaged
};

inline FitResult fit_ls(const SurvivalDataset& d, const FitOptions& opt = {},
                        const std::optional<Vector>& init = std::nullopt);

namespace detail {

/** Solve F = 0 from x0, restarting from the best iterate while restarts
 *  keep paying off. A restart resets the solver's nonmonotone allowance
 *  (which scales with the merit at the starting point), so each round is
 *  more local than the last — this is what lets a piecewise-constant score
 *  settle onto its attainable floor instead of wandering. */
template <class Func>
SolverResult dfsane_with_restarts(Func&& F, const Vector& x0,
                                  const SolverConfig& cfg) {
  SolverResult sol = dfsane(F, x0, cfg);
  for (int round = 0; round < 4 && !sol.converged; ++round) {
    SolverResult next = dfsane(F, sol.beta_hat, cfg);
    next.iterations += sol.iterations;
    if (next.f_norm >= 0.9 * sol.f_norm) {
      if (next.f_norm < sol.f_norm) sol = std::move(next);
      break;
    }
    sol = std::move(next);
  }
  return sol;
}

}  // namespace detail

/** Rank-based fit via DF-SANE, initialized at the least-squares estimate.
 *  The squared-norm merit of a rank score has spurious local basins beyond
 *  the loss valley that strand a zero-started solver; the Buckley-James
 *  estimate (itself iterated from zero) starts the search inside the
 *  informative region, in line with standard two-stage practice for these
 *  estimators. ns accepts stagnation within the scale-aware tolerance;
 *  is must meet the solver tolerance. */
inline FitResult fit_rank(const SurvivalDataset& d, EqType eq,
                          const FitOptions& opt = {}) {
  Vector x0 = Vector::Zero(d.p());
  try {
    const FitResult ls = fit_ls(d, opt, x0);
    if (ls.beta_hat.allFinite()) x0 = ls.beta_hat;
  } catch (const Error&) {
    // fall back to the zero start
  }
  SolverResult sol;
  if (eq == EqType::ns)
    sol = detail::dfsane_with_restarts(
        [&](const Vector& b) { return gehan_score_ns(b, d); }, x0, opt.solver);
  else
    sol = detail::dfsane_with_restarts(
        [&](const Vector& b) { return gehan_score_is(b, d); }, x0, opt.solver);

  FitResult fit;
  fit.est_method = EstMethod::rr;
  fit.eq_type = eq;
  if (!sol.converged) {
    if (eq == EqType::ns && sol.f_norm <= ns_accept_tolerance(opt, d.n()))
      fit.converged_nonsmooth = true;
    else
      throw SolverFailure(sol.f_norm);
  }
  fit.beta_hat = sol.beta_hat;
  fit.beta_source_scale = unscale_coefficients(d, sol.beta_hat);
  fit.solver = std::move(sol);
  return fit;
}

// --------------------------------------------------------------- least squares

/** Buckley-James least-squares fit. Censored residuals are imputed by their
 *  Kaplan-Meier mean residual life, giving imputed responses
 *  y*_i = e*_i(beta) - Z_i beta; beta is then updated by centered least
 *  squares with the sign convention of the AFT model. Iterates to an
 *  infinity-norm tolerance of 1e-6 (at most 100 iterations); a two-cycle
 *  returns the average of the last two iterates, flagged. */
inline FitResult fit_ls(const SurvivalDataset& d,
                        const FitOptions& /*opt*/,
                        const std::optional<Vector>& init) {
  const Index n = d.n();
  const Index p = d.p();

  // The centered Gram matrix is fixed across iterations.
  const Eigen::RowVectorXd z_bar = d.covariates.colwise().mean();
  const Matrix z_centered = d.covariates.rowwise() - z_bar;
  const Matrix gram = z_centered.transpose() * z_centered;
  const auto svd =
      gram.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[0] <= 0.0 || sv[p - 1] <= 1e-10 * sv[0]) throw SingularDesign();

  Vector beta = init.value_or(Vector::Zero(p));
  Vector beta_prev = beta;

  FitResult fit;
  fit.est_method = EstMethod::ls;
  const double tol = 1e-6;
  const int max_iter = 100;
  double diff = 0.0;
  int m = 0;
  bool converged = false;
  for (m = 0; m < max_iter; ++m) {
    const Vector e = residual_times(beta, d);
    const Vector e_star = imputed_residuals(e, d.status);
    const Vector y_star = e_star - d.covariates * beta;
    const double y_bar = y_star.mean();
    const Vector rhs =
        z_centered.transpose() * (y_star.array() - y_bar).matrix();
    const Vector beta_next = -svd.solve(rhs);

    diff = (beta_next - beta).lpNorm<Eigen::Infinity>();
    if (diff <= tol) {
      beta = beta_next;
      converged = true;
      ++m;
      break;
    }
    if (m >= 1 &&
        (beta_next - beta_prev).lpNorm<Eigen::Infinity>() <= tol) {
      // Two-cycle: settle on the midpoint.
      beta = 0.5 * (beta + beta_next);
      fit.oscillated = true;
      converged = true;
      ++m;
      break;
    }
    beta_prev = beta;
    beta = beta_next;
  }

  fit.beta_hat = beta;
  fit.beta_source_scale = unscale_coefficients(d, beta);
  fit.solver.beta_hat = beta;
  fit.solver.f_norm = diff;
  fit.solver.iterations = m;
  fit.solver.converged = converged;
  fit.solver.stagnated = !converged;
  return fit;
}

}  // namespace afttest
