#pragma once

/** @file dfsane.hpp
 *  Derivative-free spectral residual solver (DF-SANE) for p-dimensional
 *  nonlinear systems F(x) = 0, possibly nonsmooth. This is the root-finder
 *  behind every estimating equation in the library: it needs only F values,
 *  uses the spectral step length sigma_k = (s's)/(s'y) as an implicit
 *  Jacobian scale, and globalizes with a nonmonotone line search that tries
 *  both +/- directions along d = -sigma F.
 */

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <utility>

#include "errors.hpp"
#include "types.hpp"

namespace afttest {

struct SolverConfig {
  double tol_f = 1e-7;      ///< convergence test on ||F|| / sqrt(p)
  int max_iter = 500;       ///< max accepted steps
  int history_M = 10;       ///< nonmonotone window (max over last M merits)
  double sigma_min = 1e-10; ///< spectral coefficient magnitude floor
  double sigma_max = 1e10;  ///< spectral coefficient magnitude cap
  double gamma = 1e-4;      ///< sufficient-decrease weight
  double tau_min = 0.1;     ///< backtracking contraction bounds
  double tau_max = 0.5;
  double alpha_floor = 1e-14;  ///< step underflow => stagnation
  /** Trust-style cap: one trial step never exceeds step_max * max(1, ||x||).
   *  Piecewise-constant systems have merit plateaus far from the root that a
   *  raw spectral step can jump onto and never leave; the cap keeps every
   *  move inside the region the residual actually informs. */
  double step_max = 10.0;
};

struct SolverResult {
  Vector beta_hat;   ///< best iterate found
  double f_norm = 0; ///< ||F(beta_hat)|| / sqrt(p)
  int iterations = 0;
  bool converged = false;  ///< f_norm <= tol_f
  bool stagnated = false;  ///< step underflow or iteration cap hit
};

/** Solve F(x) = 0 from x0. Always returns the best iterate seen; `converged`
 *  and `stagnated` report how the run ended. Nonsmooth systems (piecewise-
 *  constant scores) may terminate stagnated at a small residual norm; the
 *  caller decides whether that is acceptable. */
template <class Func>
SolverResult dfsane(Func&& F, const Vector& x0, const SolverConfig& cfg = {}) {
  const auto p = static_cast<double>(x0.size());
  const double sqrt_p = std::sqrt(p);
  const double inf = std::numeric_limits<double>::infinity();

  // Merit f(x) = ||F(x)||^2; returns +inf for non-finite trial evaluations so
  // the line search backs away from overflow regions instead of aborting.
  auto merit = [&](const Vector& x, Vector& Fout) -> double {
    Fout = F(x);
    return Fout.allFinite() ? Fout.squaredNorm() : inf;
  };

  Vector x = x0, Fx;
  double fx = merit(x, Fx);
  if (!std::isfinite(fx)) throw NonFiniteEvaluation("the initial point");

  SolverResult best;
  best.beta_hat = x;
  best.f_norm = std::sqrt(fx) / sqrt_p;
  if (best.f_norm <= cfg.tol_f) {
    best.converged = true;
    return best;
  }

  const double f0 = fx;
  double sigma = std::min(1.0, 1.0 / std::sqrt(fx));
  std::deque<double> history{fx};  // last history_M accepted merit values

  Vector xc(x.size()), Fc(x.size()), Fc2(x.size()), xc2(x.size());
  for (int k = 0; k < cfg.max_iter; ++k) {
    const double eta_k = f0 / ((1.0 + k) * (1.0 + k));
    const double fmax = *std::max_element(history.begin(), history.end());
    const Vector F_prev = Fx;
    Vector d = -sigma * Fx;
    const double d_cap = cfg.step_max * std::max(1.0, x.norm());
    if (d.norm() > d_cap) d *= d_cap / d.norm();

    double alpha_p = 1.0, alpha_m = 1.0;
    Vector step;
    double f_new = 0;
    bool accepted = false, underflow = false;
    while (!accepted) {
      xc = x + alpha_p * d;
      const double fc = merit(xc, Fc);
      if (fc <= fmax + eta_k - cfg.gamma * alpha_p * alpha_p * fx) {
        step = alpha_p * d;
        x = xc;
        Fx.swap(Fc);
        f_new = fc;
        accepted = true;
        break;
      }
      xc2 = x - alpha_m * d;
      const double fc2 = merit(xc2, Fc2);
      if (fc2 <= fmax + eta_k - cfg.gamma * alpha_m * alpha_m * fx) {
        step = -alpha_m * d;
        x = xc2;
        Fx.swap(Fc2);
        f_new = fc2;
        accepted = true;
        break;
      }
      // Quadratic-interpolation backtracking, clamped into
      // [tau_min*alpha, tau_max*alpha]; a non-finite trial contracts hard.
      auto contract = [&](double alpha, double f_cand) {
        if (!std::isfinite(f_cand)) return cfg.tau_min * alpha;
        const double proposal =
            alpha * alpha * fx / (f_cand + (2.0 * alpha - 1.0) * fx);
        return std::clamp(proposal, cfg.tau_min * alpha, cfg.tau_max * alpha);
      };
      alpha_p = contract(alpha_p, fc);
      alpha_m = contract(alpha_m, fc2);
      if (std::max(alpha_p, alpha_m) < cfg.alpha_floor) {
        underflow = true;
        break;
      }
    }
    if (underflow) {
      best.stagnated = true;
      return best;
    }

    const Vector y = Fx - F_prev;  // F(x_{k+1}) - F(x_k)
    fx = f_new;
    best.iterations = k + 1;
    history.push_back(fx);
    if (static_cast<int>(history.size()) > cfg.history_M) history.pop_front();

    const double f_norm = std::sqrt(fx) / sqrt_p;
    if (f_norm < best.f_norm) {
      best.beta_hat = x;
      best.f_norm = f_norm;
    }
    if (best.f_norm <= cfg.tol_f) {
      best.converged = true;
      return best;
    }

    // Spectral coefficient for the next step. A degenerate or out-of-range
    // quotient (y vanishes on a flat cell of a nonsmooth score, or the
    // curvature estimate collapses) falls back to the normalized residual
    // direction: |sigma| * ||F|| <= 1.
    const double sty = step.dot(y);
    const double quotient = sty == 0.0 ? 0.0 : step.squaredNorm() / sty;
    if (sty == 0.0 || std::abs(quotient) < cfg.sigma_min ||
        std::abs(quotient) > cfg.sigma_max)
      sigma = 1.0 / std::max(1e-5, std::sqrt(fx));
    else
      sigma = quotient;
  }
  best.stagnated = true;
  return best;
}

}  // namespace afttest
