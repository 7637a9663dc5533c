#pragma once

/** @file gof.hpp
 *  Goodness-of-fit engine: observed cumulative-sum processes of martingale
 *  residuals (omnibus / link / functional-form), multiplier-resampled
 *  approximations of their null law, pointwise standardization, and
 *  Kolmogorov-type supremum p-values.
 *
 *  Everything lives in the sorted-subject frame (subjects ordered by their
 *  residuals at beta_hat; the n sorted residuals are also the time grid).
 *  Anchors z_1 <= ... <= z_n form a chain: each covariate column is sorted
 *  independently and anchor j takes the j-th smallest value in every column,
 *  so the cumulation indicator pi_i(z_j) = prod_q I(Z_iq <= z_jq) reduces to
 *  I(j >= thr_i) for a per-subject threshold. The functional-form test uses
 *  the chain built from the tested column alone.
 *
 *  Observed process (omnibus; rows = time, columns = anchors):
 *      W(t_k, z_j) = n^{-1/2} sum_i pi_i(z_j) Mhat_i(t_k).
 *  The link and functional-form statistics are the terminal-time slice
 *  W(t_n, .), an n-vector over the anchors.
 *
 *  Each resampled path draws i.i.d. multipliers phi_i = xi_i - 1 with
 *  xi ~ Exp(1), solves the target-shifted estimating equation
 *      U(b) = n^{-1} U_phi            (U_phi = the multiplier-perturbed
 *  score at beta_hat) for the path coefficient b*, and evaluates
 *      What = term1 - term2 - term3:
 *    term1  multiplier fluctuation, compensated by the at-risk average
 *           E_pi(t, z) of the indicators:
 *           n^{-1/2} sum_i phi_i int_0^t [pi_i(z) - E_pi(s, z)] dMhat_i(s);
 *    term2  first-order drift from beta_hat - b*, using kernel estimates of
 *           the residual-scale densities (Gaussian kernel on exp-residuals,
 *           bandwidth (3n/4)^{-1/5} sd);
 *    term3  the hazard shift n^{-1/2} int_0^t S_pi(s, z) d(Lambdahat -
 *           Lambdahat*)(s) with Lambdahat* the Nelson-Aalen hazard of the
 *           b*-residuals.
 *
 *  The pointwise resampling SE (divisor B - 1) is floored and capped at
 *  sample quantiles of its own distribution before standardizing, with the
 *  floor probability sqrt(censoring) for the omnibus test and censoring for
 *  link / functional form; a zero SE standardizes to 0 so degenerate points
 *  never drive the supremum.
 *
 *  Paths are independent, seed-addressed work units: results are
 *  bit-identical for any thread count.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "residual_process.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace afttest {

enum class TestKind { omnibus, link, covform };

inline const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::omnibus: return "omnibus";
    case TestKind::link: return "link";
    default: return "covform";
  }
}

struct TestType {
  TestKind kind = TestKind::omnibus;
  int cov_index = 1;  ///< 1-based covariate position, covform only
};

struct GofConfig {
  int npath = 200;      ///< requested paths; values below 10 are raised to 10
  int npathsave = 50;   ///< how many resampled paths the result stores
  std::uint64_t seed = 1;
  int threads = 1;
  FitOptions fit;
  /** Test hook: force every multiplier to 1 (phi = 0). The path equation is
   *  then solved by beta_hat itself, so b* = beta_hat and every path term
   *  vanishes identically. */
  bool force_unit_multipliers = false;
};

namespace detail {

/** Per-subject anchor thresholds: pi_i(z_j) = I(j >= thr_i). Omnibus / link
 *  fold the chain over every column; functional form uses one column. */
inline std::vector<int> anchor_thresholds(const Matrix& Zs, TestType test) {
  const Index n = Zs.rows();
  std::vector<int> thr(n, 0);
  std::vector<double> col(n);
  auto fold = [&](Index q) {
    for (Index m = 0; m < n; ++m) col[m] = Zs(m, q);
    std::sort(col.begin(), col.end());
    for (Index m = 0; m < n; ++m) {
      const int t = static_cast<int>(
          std::lower_bound(col.begin(), col.end(), Zs(m, q)) - col.begin());
      if (t > thr[m]) thr[m] = t;
    }
  };
  if (test.kind == TestKind::covform)
    fold(test.cov_index - 1);
  else
    for (Index q = 0; q < Zs.cols(); ++q) fold(q);
  return thr;
}

/** acc[j] = sum of w_m over subjects with thr_m <= j (indicator-weighted
 *  cumulation over the anchor chain). */
inline Vector threshold_prefix(const std::vector<int>& thr, const Vector& w) {
  const Index n = w.size();
  Vector acc = Vector::Zero(n);
  for (Index m = 0; m < n; ++m) acc[thr[m]] += w[m];
  for (Index j = 1; j < n; ++j) acc[j] += acc[j - 1];
  return acc;
}

/** Nelson-Aalen hazard increments by sorted position: the whole mass of a
 *  tie group (#events / #at-risk, with >= at-risk) sits at the group's first
 *  position so cumulatives are exact in the value-based sense. */
inline Vector hazard_increments(const Vector& sorted_e,
                                const Vector& delta_sorted) {
  const Index n = sorted_e.size();
  Vector dl = Vector::Zero(n);
  Index lo = 0;
  while (lo < n) {
    Index hi = lo + 1;
    while (hi < n && sorted_e[hi] == sorted_e[lo]) ++hi;
    double ev = 0.0;
    for (Index k = lo; k < hi; ++k) ev += delta_sorted[k];
    if (ev > 0.0) dl[lo] = ev / static_cast<double>(n - lo);
    lo = hi;
  }
  return dl;
}

/** Gaussian kernel density factor. */
inline double norm_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * 2.5066282746310005024);
}

/** Hyndman-Fan type-5 sample quantile (h = m p + 1/2, linear between order
 *  statistics), the convention matched by the SE floor/cap. */
inline double quantile_type5(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  const double h = static_cast<double>(m) * prob + 0.5;
  if (h <= 1.0) return v.front();
  if (h >= static_cast<double>(m)) return v.back();
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));  // 1-based
  const double frac = h - static_cast<double>(lo);
  return v[lo - 1] + frac * (v[lo] - v[lo - 1]);
}

}  // namespace detail

/** Precomputed geometry shared by the observed process and every resampled
 *  path. All matrices live in the sorted-subject frame. */
struct TestContext {
  TestType test;
  std::vector<int> order;        ///< original subject behind each sorted row
  Vector time_s;                 ///< survival times, sorted frame
  Vector delta_s;
  Vector resid_s;                ///< sorted residuals = the time grid
  Vector resid_star_s;           ///< mean-residual-life imputed residuals
  Matrix covariates_s;           ///< n x p
  std::vector<int> thr;          ///< anchor threshold per sorted subject
  Vector S0;                     ///< #at-risk per grid position
  Matrix S1;                     ///< n x p at-risk covariate sums
  Vector dLambda;                ///< hazard increments (tie mass at first pos)
  Matrix Spi;                    ///< n x n at-risk indicator mass per anchor
  Matrix Epi;                    ///< Spi / S0, rowwise
  Matrix mhat_s;                 ///< martingale residuals, sorted rows x grid
  Matrix dmhat_s;                ///< positional increments along the grid
  Matrix Uls;                    ///< n x p rows (Z_i - Zbar) e*_i / n
  Vector ft;                     ///< density factor f0(t_k) * time_k
  Vector cg;                     ///< cumulative g0 * time * dLambda
  Matrix Fz;                     ///< n x p event-only covariate chain mass / n
  Matrix Gz;                     ///< n x p all-subject analog
  double censoring = 0.0;        ///< 1 - mean(delta)
  double inv_sqrt_n = 0.0;
};

inline TestContext make_context(TestType test, const FitResult& fit,
                                const SurvivalDataset& d) {
  const Index n = d.n();
  const Index p = d.p();
  if (test.kind == TestKind::covform) {
    const Index q0 = test.cov_index - 1;
    if (q0 < 0 || q0 >= p) throw IndexOutOfRange(test.cov_index, p);
    if (d.kinds[q0] == ColumnKind::binary)
      throw BinaryCovariateForCovform(d.names[q0]);
  }

  TestContext ctx;
  ctx.test = test;
  ctx.inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  ctx.censoring = 1.0 - d.status.mean();

  const ResidualProcessSet rps = martingale_matrix(fit.beta_hat, d);
  ctx.order = rps.order;
  ctx.resid_s = rps.sorted_e;
  ctx.time_s.resize(n);
  ctx.delta_s.resize(n);
  ctx.covariates_s.resize(n, p);
  ctx.mhat_s.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    const int i = ctx.order[k];
    ctx.time_s[k] = d.time[i];
    ctx.delta_s[k] = d.status[i];
    ctx.covariates_s.row(k) = d.covariates.row(i);
    ctx.mhat_s.row(k) = rps.mhat.row(i);
  }
  ctx.resid_star_s = imputed_residuals(ctx.resid_s, ctx.delta_s);

  ctx.dmhat_s = ctx.mhat_s;
  for (Index k = n - 1; k > 0; --k)
    ctx.dmhat_s.col(k) -= ctx.mhat_s.col(k - 1);

  ctx.thr = detail::anchor_thresholds(ctx.covariates_s, test);

  // At-risk quantities per grid position (value-based, >= convention).
  ctx.S0.resize(n);
  ctx.S1.resize(n, p);
  {
    Matrix suffix = Matrix::Zero(n + 1, p);
    for (Index k = n; k-- > 0;)
      suffix.row(k) = suffix.row(k + 1) + ctx.covariates_s.row(k);
    for (Index k = 0; k < n; ++k) {
      const int g = rps.group_first[k];
      ctx.S0[k] = static_cast<double>(n - g);
      ctx.S1.row(k) = suffix.row(g);
    }
  }
  ctx.dLambda.resize(n);
  for (Index k = 0; k < n; ++k)
    ctx.dLambda[k] = rps.na_steps[k] - (k > 0 ? rps.na_steps[k - 1] : 0.0);

  // Spi(k, j) = #at-risk subjects at t_k with thr <= j; constant on tie
  // groups, built by admitting groups from the largest residual down.
  ctx.Spi.resize(n, n);
  {
    Vector cur = Vector::Zero(n);
    Index hi = n;
    while (hi > 0) {
      const Index lo = rps.group_first[hi - 1];
      for (Index m = lo; m < hi; ++m)
        for (Index j = ctx.thr[m]; j < n; ++j) cur[j] += 1.0;
      for (Index k = lo; k < hi; ++k) ctx.Spi.row(k) = cur.transpose();
      hi = lo;
    }
  }
  ctx.Epi = ctx.Spi.array().colwise() / ctx.S0.array();

  // Least-squares influence rows, for the path targets under est = ls.
  {
    const Eigen::RowVectorXd z_bar = ctx.covariates_s.colwise().mean();
    ctx.Uls = ctx.covariates_s.rowwise() - z_bar;
    ctx.Uls.array().colwise() *=
        ctx.resid_star_s.array() / static_cast<double>(n);
  }

  // Kernel drift pieces on the exp-residual scale.
  ctx.ft = Vector::Zero(n);
  ctx.cg = Vector::Zero(n);
  ctx.Fz = Matrix::Zero(n, p);
  ctx.Gz = Matrix::Zero(n, p);
  if (n > 1) {
    const Vector et = ctx.resid_s.array().exp();
    const Vector et_star = ctx.resid_star_s.array().exp();
    const double mean_et = et.mean();
    const double sd_et = std::sqrt((et.array() - mean_et).square().sum() /
                                   static_cast<double>(n - 1));
    const double bw =
        std::pow(static_cast<double>((n * 3) / 4), -0.2) * sd_et;
    if (bw > 0.0) {
      Vector g0 = Vector::Zero(n);
      for (Index k = 0; k < n; ++k)
        for (Index j = 0; j < n; ++j)
          g0[k] += detail::norm_pdf(et[k], et[j], bw);
      g0 /= static_cast<double>(n);

      Vector dF(n);
      {
        double surv = 1.0, prev_F = 0.0;
        for (Index k = 0; k < n; ++k) {
          surv *= 1.0 - ctx.dLambda[k];
          const double F = 1.0 - surv;
          dF[k] = F - prev_F;
          prev_F = F;
        }
      }
      Vector f0 = Vector::Zero(n);
      for (Index k = 0; k < n; ++k)
        for (Index j = 0; j < n; ++j)
          f0[k] += detail::norm_pdf(et_star[k], et[j], bw) * dF[j];

      ctx.ft = f0.cwiseProduct(ctx.time_s);
      double acc = 0.0;
      for (Index k = 0; k < n; ++k) {
        acc += g0[k] * ctx.time_s[k] * ctx.dLambda[k];
        ctx.cg[k] = acc;
      }
    }
    for (Index m = 0; m < n; ++m) {
      ctx.Gz.row(ctx.thr[m]) += ctx.covariates_s.row(m);
      if (ctx.delta_s[m] == 1.0)
        ctx.Fz.row(ctx.thr[m]) += ctx.covariates_s.row(m);
    }
    for (Index j = 1; j < n; ++j) {
      ctx.Gz.row(j) += ctx.Gz.row(j - 1);
      ctx.Fz.row(j) += ctx.Fz.row(j - 1);
    }
    ctx.Gz /= static_cast<double>(n);
    ctx.Fz /= static_cast<double>(n);
  }
  return ctx;
}

/** Observed process from a prepared context. Omnibus: n x n with rows = grid
 *  times, columns = anchors. Link / covform: n x 1 over the anchors,
 *  evaluated at the largest grid time (the omnibus last row). */
inline Matrix observed_from_context(const TestContext& ctx) {
  const Index n = ctx.mhat_s.rows();
  if (ctx.test.kind == TestKind::omnibus) {
    Matrix obs(n, n);
    for (Index k = 0; k < n; ++k)
      obs.row(k) =
          detail::threshold_prefix(ctx.thr, ctx.mhat_s.col(k)).transpose();
    return ctx.inv_sqrt_n * obs;
  }
  return ctx.inv_sqrt_n *
         detail::threshold_prefix(ctx.thr, ctx.mhat_s.col(n - 1));
}

/** Observed test process for (test, fit, d); see observed_from_context for
 *  the shapes. */
inline Matrix observed_process(TestType test, const FitResult& fit,
                               const SurvivalDataset& d) {
  return observed_from_context(make_context(test, fit, d));
}

namespace detail {

/** Solve the target-shifted estimating equation U(b) = target from beta_hat.
 *  Empty result = this attempt failed. Acceptance mirrors the fitting rules:
 *  the non-smoothed score settles onto its attainable floor (scale-aware
 *  tolerance), the smoothed and least-squares equations are solvable outright
 *  but keep a small tolerance as a safety margin. */
inline std::optional<Vector> solve_shifted(const SurvivalDataset& d,
                                           EstMethod est,
                                           std::optional<EqType> eq,
                                           const Vector& beta_hat,
                                           const Vector& target,
                                           const FitOptions& opt) {
  try {
    SolverResult sol;
    double tol = 1e-4;
    if (est == EstMethod::ls) {
      sol = dfsane(
          [&](const Vector& b) { return (ls_score(b, d) - target).eval(); },
          beta_hat, opt.solver);
    } else if (eq == EqType::ns) {
      tol = ns_accept_tolerance(opt, d.n());
      sol = dfsane(
          [&](const Vector& b) {
            return (gehan_score_ns(b, d) - target).eval();
          },
          beta_hat, opt.solver);
    } else {
      tol = ns_accept_tolerance(opt, d.n());
      sol = dfsane(
          [&](const Vector& b) {
            return (gehan_score_is(b, d) - target).eval();
          },
          beta_hat, opt.solver);
    }
    if (sol.converged || sol.f_norm <= tol) return sol.beta_hat;
    return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
}

/** One resampled path. phi_s is the centered multiplier vector in the sorted
 *  frame and tempvec its dmhat projection (shared with the target). */
inline Matrix path_process(const TestContext& ctx, const SurvivalDataset& d,
                           const Vector& beta_hat, const Vector& b_s,
                           const Vector& phi_s, const Vector& tempvec) {
  const Index n = ctx.mhat_s.rows();
  const Vector c =
      std::sqrt(static_cast<double>(n)) * (beta_hat - b_s);
  const Vector phiF = ctx.Fz * c;
  const Vector phiG = ctx.Gz * c;

  // Hazard increments of the b*-residuals, aligned by sorted position.
  Vector v3(n);
  {
    const Vector e_b = residual_times(b_s, d);
    const std::vector<int> ord = sort_permutation(e_b);
    Vector se(n), sd(n);
    for (Index k = 0; k < n; ++k) {
      se[k] = e_b[ord[k]];
      sd[k] = d.status[ord[k]];
    }
    v3 = ctx.dLambda - hazard_increments(se, sd);
  }

  if (ctx.test.kind != TestKind::omnibus) {
    const Vector t1 =
        threshold_prefix(ctx.thr,
                         phi_s.cwiseProduct(ctx.mhat_s.col(n - 1))) -
        ctx.Epi.transpose() * tempvec;
    const Vector t3 = ctx.Spi.transpose() * v3;
    return ctx.inv_sqrt_n * (t1 - t3) - ctx.ft[n - 1] * phiF -
           ctx.cg[n - 1] * phiG;
  }

  Matrix path(n, n);
  Eigen::RowVectorXd acc1 = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd acc3 = Eigen::RowVectorXd::Zero(n);
  for (Index k = 0; k < n; ++k) {
    acc1 += threshold_prefix(ctx.thr, phi_s.cwiseProduct(ctx.dmhat_s.col(k)))
                .transpose() -
            tempvec[k] * ctx.Epi.row(k);
    acc3 += v3[k] * ctx.Spi.row(k);
    path.row(k) = ctx.inv_sqrt_n * (acc1 - acc3) -
                  ctx.ft[k] * phiF.transpose() - ctx.cg[k] * phiG.transpose();
  }
  return path;
}

}  // namespace detail

struct ResampleOutput {
  std::vector<Matrix> processes;  ///< successful paths, in path-index order
  std::vector<Vector> betas;      ///< path coefficients, aligned
  int requested = 0;              ///< path count after the minimum raise
  int dropped = 0;                ///< paths that failed twice
};

/** Run the resampling engine on a prepared context. Each path owns the RNG
 *  stream (seed, path index); a failed solve is retried once with a fresh
 *  draw from the same stream, then dropped. */
inline ResampleOutput resample_paths_ctx(const TestContext& ctx,
                                         const FitResult& fit,
                                         const SurvivalDataset& d,
                                         const GofConfig& cfg) {
  const Index n = d.n();
  const int requested = std::max(cfg.npath, 10);
  std::vector<std::optional<Matrix>> slots(requested);
  std::vector<std::optional<Vector>> beta_slots(requested);

  auto run_range = [&](int lo, int hi) {
    Vector xi(n), phi_s(n);
    for (int b = lo; b < hi; ++b) {
      auto rng = make_stream(cfg.seed, StreamDomain::resampling_path, b + 1);
      for (int attempt = 0; attempt < 2; ++attempt) {
        if (cfg.force_unit_multipliers)
          xi.setOnes();
        else
          for (Index i = 0; i < n; ++i) xi[i] = draw_exp1(rng);
        for (Index k = 0; k < n; ++k) phi_s[k] = xi[ctx.order[k]] - 1.0;
        const Vector tempvec = ctx.dmhat_s.transpose() * phi_s;

        std::optional<Vector> beta_star;
        if (cfg.force_unit_multipliers) {
          beta_star = fit.beta_hat;  // phi = 0 makes beta_hat the exact root
        } else {
          Vector target;
          if (fit.est_method == EstMethod::ls) {
            target = ctx.Uls.transpose() * phi_s;
          } else {
            Matrix wz = ctx.covariates_s;
            wz.array().colwise() *= phi_s.array();
            const Matrix tempmat = ctx.dmhat_s.transpose() * wz;
            target = (tempmat.transpose() * ctx.S0 -
                      ctx.S1.transpose() * tempvec) /
                     static_cast<double>(n);
          }
          beta_star = detail::solve_shifted(d, fit.est_method, fit.eq_type,
                                            fit.beta_hat, target, cfg.fit);
        }
        if (beta_star) {
          slots[b] = detail::path_process(ctx, d, fit.beta_hat, *beta_star,
                                          phi_s, tempvec);
          beta_slots[b] = *beta_star;
          break;
        }
      }
    }
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1 || requested < 2) {
    run_range(0, requested);
  } else {
    const int chunk = (requested + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(requested, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  ResampleOutput out;
  out.requested = requested;
  for (int b = 0; b < requested; ++b) {
    if (!slots[b]) {
      ++out.dropped;
      continue;
    }
    out.processes.push_back(std::move(*slots[b]));
    out.betas.push_back(std::move(*beta_slots[b]));
  }
  return out;
}

/** Resampled approximations of the null law of the observed process. */
inline ResampleOutput resample_paths(TestType test, const FitResult& fit,
                                     const SurvivalDataset& d, int npath,
                                     std::uint64_t seed) {
  GofConfig cfg;
  cfg.npath = npath;
  cfg.seed = seed;
  return resample_paths_ctx(make_context(test, fit, d), fit, d, cfg);
}

/** Pointwise sample standard deviation across paths (divisor B - 1). */
inline Matrix pointwise_se(const std::vector<Matrix>& paths) {
  const auto B = paths.size();
  Matrix mean = Matrix::Zero(paths[0].rows(), paths[0].cols());
  for (const Matrix& w : paths) mean += w;
  mean /= static_cast<double>(B);
  Matrix var = Matrix::Zero(mean.rows(), mean.cols());
  for (const Matrix& w : paths) var += (w - mean).cwiseAbs2();
  var /= static_cast<double>(B - 1);
  return var.cwiseSqrt();
}

/** Floor and cap the SE surface at sample quantiles of its own values:
 *  [Q(floor_prob), max]. Near-degenerate points (early anchors, early times)
 *  would otherwise blow up the standardized process. */
inline void clamp_se(Matrix& se, double floor_prob) {
  std::vector<double> vals(se.data(), se.data() + se.size());
  const double lo = detail::quantile_type5(vals, floor_prob);
  const double hi = detail::quantile_type5(std::move(vals), 1.0);
  for (Index c = 0; c < se.cols(); ++c)
    for (Index r = 0; r < se.rows(); ++r)
      se(r, c) = std::min(hi, std::max(lo, se(r, c)));
}

/** Divide by SE where SE is meaningfully positive; a degenerate SE (all
 *  paths identical, e.g. under the unit-multiplier hook) standardizes to 0
 *  so it never drives the supremum. */
inline Matrix standardize_one(const Matrix& x, const Matrix& se) {
  Matrix out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r)
      out(r, c) = se(r, c) >= 1e-10 ? x(r, c) / se(r, c) : 0.0;
  return out;
}

/** Standardize the observed process and every path by the clamped pointwise
 *  resampling SE. Returns (obs_std, paths_std, SE). */
inline std::tuple<Matrix, std::vector<Matrix>, Matrix> standardize(
    const Matrix& obs, const std::vector<Matrix>& paths, double floor_prob) {
  Matrix se = pointwise_se(paths);
  clamp_se(se, floor_prob);
  Matrix obs_std = standardize_one(obs, se);
  std::vector<Matrix> paths_std;
  paths_std.reserve(paths.size());
  for (const Matrix& w : paths) paths_std.push_back(standardize_one(w, se));
  return {std::move(obs_std), std::move(paths_std), std::move(se)};
}

inline double supremum(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/** Kolmogorov supremum p-values: the fraction of paths whose supremum
 *  reaches the observed one (no +1 smoothing, so 1/npath is attainable). */
inline std::pair<double, double> supremum_pvalues(
    const Matrix& obs, const std::vector<Matrix>& paths,
    const Matrix& obs_std, const std::vector<Matrix>& paths_std) {
  const double s = supremum(obs);
  const double s_std = supremum(obs_std);
  int count = 0, count_std = 0;
  for (const Matrix& w : paths)
    if (supremum(w) >= s) ++count;
  for (const Matrix& w : paths_std)
    if (supremum(w) >= s_std) ++count_std;
  const double b = static_cast<double>(paths.size());
  return {count / b, count_std / b};
}

/** Full diagnostic-test result; shapes follow the test type (omnibus:
 *  n x n with rows = grid times, link/covform: n x 1 over anchors). */
struct GofTestResult {
  Vector beta;
  Vector beta_source_scale;
  TestType test;
  EstMethod est_method = EstMethod::rr;
  std::optional<EqType> eq_type;
  int npath = 0;            ///< requested (after minimum raise)
  int npath_effective = 0;  ///< paths that actually contributed
  int npathsave = 0;
  std::uint64_t seed = 0;

  Matrix obs_process;
  std::vector<Matrix> apprx_process;  ///< first min(npathsave, effective)
  Matrix SE_process;
  Matrix obs_std_process;
  std::vector<Matrix> apprx_std_process;
  double p_value = 1.0;
  double p_std_value = 1.0;

  Vector time;       ///< data echo
  Vector delta;
  Matrix covariates;  ///< as analyzed (scaled)
  std::vector<std::string> cov_names;
  std::vector<int> time_order;  ///< subjects by residual rank
};

/** Orchestrate one diagnostic test: fit (unless a fit is supplied), observed
 *  process, resampling, standardization, p-values. */
inline GofTestResult run_afttest(const SurvivalDataset& d, TestType test,
                                 EstMethod est_method, EqType eq_type,
                                 const GofConfig& cfg,
                                 const FitResult* prefit = nullptr) {
  d.validate();
  FitResult fit;
  if (prefit)
    fit = *prefit;
  else if (est_method == EstMethod::rr)
    fit = fit_rank(d, eq_type, cfg.fit);
  else
    fit = fit_ls(d, cfg.fit);

  const TestContext ctx = make_context(test, fit, d);
  Matrix obs = observed_from_context(ctx);
  ResampleOutput rs = resample_paths_ctx(ctx, fit, d, cfg);
  if (rs.processes.size() < 2)
    throw Error("resampling produced fewer than 2 usable paths");

  const double floor_prob = test.kind == TestKind::omnibus
                                ? std::sqrt(ctx.censoring)
                                : ctx.censoring;
  auto [obs_std, paths_std, se] = standardize(obs, rs.processes, floor_prob);
  const auto [p, p_std] =
      supremum_pvalues(obs, rs.processes, obs_std, paths_std);

  GofTestResult r;
  r.beta = fit.beta_hat;
  r.beta_source_scale = fit.beta_source_scale;
  r.test = test;
  r.est_method = fit.est_method;
  r.eq_type = fit.eq_type;
  r.npath = rs.requested;
  r.npath_effective = static_cast<int>(rs.processes.size());
  r.npathsave = std::max(0, cfg.npathsave);
  r.seed = cfg.seed;
  r.p_value = p;
  r.p_std_value = p_std;

  const std::size_t keep =
      std::min<std::size_t>(r.npathsave, rs.processes.size());
  r.apprx_process.assign(rs.processes.begin(), rs.processes.begin() + keep);
  r.apprx_std_process.assign(paths_std.begin(), paths_std.begin() + keep);
  r.obs_process = std::move(obs);
  r.obs_std_process = std::move(obs_std);
  r.SE_process = std::move(se);

  r.time = d.time;
  r.delta = d.status;
  r.covariates = d.covariates;
  r.cov_names = d.names;
  r.time_order = ctx.order;
  return r;
}

}  // namespace afttest
