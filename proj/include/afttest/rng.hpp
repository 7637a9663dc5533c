#pragma once

/** @file rng.hpp
 *  Deterministic random-number streams. Every unit of stochastic work (one
 *  resampling path, one simulation replication) owns an independent generator
 *  derived from (seed, domain, index), so results are bit-identical for any
 *  scheduling of the work across threads.
 *
 *  All variate transforms are hand-rolled from raw 64-bit draws because the
 *  <random> distribution classes are not required to be implementation-
 *  portable; std::mt19937_64 itself is fully specified by the standard.
 */

#include <cmath>
#include <cstdint>
#include <random>

namespace afttest {

/** Work domains keep unrelated streams disjoint even at equal index. */
enum class StreamDomain : std::uint32_t {
  resampling_path = 1,
  simulation_rep = 2,
  pilot_draws = 3,
};

/** Build the generator for one unit of work. */
inline std::mt19937_64 make_stream(std::uint64_t seed, StreamDomain domain,
                                   std::uint64_t index) {
  std::seed_seq sseq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(index),
      static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(sseq);
}

/** Uniform draw on the open interval (0, 1): safe for log(). */
inline double uniform_open01(std::mt19937_64& g) {
  // 53-bit mantissa, offset by half an ulp so 0 and 1 are unattainable.
  return (static_cast<double>(g() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/** Standard exponential draw (mean 1). */
inline double draw_exp1(std::mt19937_64& g) {
  return -std::log(uniform_open01(g));
}

/** Standard normal draw via Box-Muller (two uniforms per variate so the
 *  stream position does not depend on call history). */
inline double draw_normal(std::mt19937_64& g) {
  const double u1 = uniform_open01(g);
  const double u2 = uniform_open01(g);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

/** One splitmix64 step: a cheap, well-mixed 64 -> 64 bit hash. Used to
 *  derive per-replication sub-seeds that are decorrelated from the master
 *  seed and from each other. */
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace afttest
