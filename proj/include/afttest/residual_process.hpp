#pragma once

/** @file residual_process.hpp
 *  Counting-process machinery on the residual time scale: risk sets, the
 *  Nelson-Aalen cumulative hazard, and the n x n martingale residual matrix
 *  every goodness-of-fit test consumes,
 *
 *      Mhat_i(t) = Delta_i I(e_i <= t) - Lambdahat(min(e_i, t)).
 *
 *  The evaluation grid is the n sorted residual times; ties are grouped by
 *  value so the at-risk convention (>=) and the column-sum-zero identity are
 *  exact.
 */

#include <algorithm>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "types.hpp"

namespace afttest {

/** Right-continuous nondecreasing step function, zero before the first jump
 *  time. */
struct StepFunction {
  std::vector<double> times;   ///< jump locations, strictly ascending
  std::vector<double> values;  ///< cumulative value at each jump

  double operator()(double t) const {
    // Last jump time <= t.
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values[(it - times.begin()) - 1];
  }
};

/** Nelson-Aalen cumulative hazard of (e, delta):
 *  Lambdahat(t) = sum over events with e_i <= t of 1 / #{j : e_j >= e_i}.
 *  Tied events each contribute their own 1/R term at the shared time. */
inline StepFunction nelson_aalen(const Vector& e, const Vector& delta) {
  const Index n = e.size();
  if (n == 0) throw EmptyInput();
  const std::vector<int> order = detail::sort_permutation(e);

  StepFunction na;
  double cum = 0.0;
  Index lo = 0;
  while (lo < n) {
    Index hi = lo + 1;
    while (hi < n && e[order[hi]] == e[order[lo]]) ++hi;
    int events = 0;
    for (Index k = lo; k < hi; ++k)
      if (delta[order[k]] == 1.0) ++events;
    if (events > 0) {
      const double risk = static_cast<double>(n - lo);  // #{j : e_j >= value}
      cum += static_cast<double>(events) / risk;
      na.times.push_back(e[order[lo]]);
      na.values.push_back(cum);
    }
    lo = hi;
  }
  return na;
}

/** Residual grid, hazard steps, and the full martingale residual matrix at a
 *  given coefficient vector. */
struct ResidualProcessSet {
  Vector e;                       ///< residual times, original subject order
  std::vector<int> order;         ///< ascending permutation (ties by index)
  Vector sorted_e;                ///< e[order], the evaluation grid t_1..t_n
  Vector na_steps;                ///< Lambdahat(t_k), constant on tie groups
  std::vector<int> group_first;   ///< first sorted position of t_k's tie group
  Matrix mhat;                    ///< (i, k): subject i at grid time t_k
};

/** Build the full residual-process set for beta on dataset d. */
inline ResidualProcessSet martingale_matrix(const Vector& beta,
                                            const SurvivalDataset& d) {
  ResidualProcessSet rps;
  rps.e = residual_times(beta, d);
  const Index n = rps.e.size();
  rps.order = detail::sort_permutation(rps.e);
  rps.sorted_e.resize(n);
  for (Index k = 0; k < n; ++k) rps.sorted_e[k] = rps.e[rps.order[k]];

  const StepFunction na = nelson_aalen(rps.e, d.status);
  rps.na_steps.resize(n);
  rps.group_first.resize(n);
  for (Index k = 0; k < n; ++k) {
    rps.group_first[k] =
        (k > 0 && rps.sorted_e[k] == rps.sorted_e[k - 1])
            ? rps.group_first[k - 1]
            : static_cast<int>(k);
    rps.na_steps[k] = na(rps.sorted_e[k]);
  }

  // Position of each subject in the sorted grid.
  std::vector<int> pos(n);
  for (Index k = 0; k < n; ++k) pos[rps.order[k]] = static_cast<int>(k);

  rps.mhat.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    const int first_k = rps.group_first[pos[i]];  // e_i <= t_k iff k >= this
    const double lam_i = rps.na_steps[pos[i]];    // Lambdahat(e_i)
    const double di = d.status[i];
    for (Index k = 0; k < n; ++k) {
      const double ind = k >= first_k ? di : 0.0;
      rps.mhat(i, k) = ind - std::min(lam_i, rps.na_steps[k]);
    }
  }
  return rps;
}

}  // namespace afttest
