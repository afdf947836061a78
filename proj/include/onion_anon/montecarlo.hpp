#pragma once

// Seeded Monte Carlo estimates of E[psi | C_D(u) = d].
//
// Sample i draws all of its randomness from derive_seed(seed, i), and
// samples are reduced in fixed-size chunks merged in chunk order, so an
// estimate depends only on (seed, samples) and never on the thread count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string_view>
#include <vector>

#include "onion_anon/error.hpp"
#include "onion_anon/inference.hpp"
#include "onion_anon/model.hpp"
#include "onion_anon/numeric.hpp"
#include "onion_anon/structured.hpp"

namespace onion_anon {

enum class McMode { generic, worst_case, common };

inline constexpr std::string_view to_string(McMode m) {
  switch (m) {
    case McMode::generic: return "generic";
    case McMode::worst_case: return "worst-case";
    case McMode::common: return "common";
  }
  return "?";
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct McOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

inline constexpr std::size_t kSamplesPerChunk = 1024;

// Welford accumulator; merge() is Chan et al.'s pairwise update.
struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(o.count);
    const double delta = o.mean - mean;
    const double total = na + nb;
    mean += delta * nb / total;
    m2 += o.m2 + delta * delta * na * nb / total;
    count += o.count;
  }
};

template <typename SampleFn>
Estimate run_estimate(const McOptions& opts, SampleFn&& sample) {
  if (opts.samples < 2) throw ModelError("Monte Carlo needs at least 2 samples");
  const std::size_t chunks = (opts.samples + kSamplesPerChunk - 1) / kSamplesPerChunk;
  std::vector<Moments> parts(chunks);
  parallel_chunks(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t end = std::min(opts.samples, (c + 1) * kSamplesPerChunk);
    Moments m;
    for (std::size_t i = c * kSamplesPerChunk; i < end; ++i) {
      m.add(sample(derive_seed(opts.seed, i)));
    }
    parts[c] = m;
  });
  Moments all;
  for (const auto& m : parts) all.merge(m);
  Estimate est;
  est.mean = std::clamp(all.mean, 0.0, 1.0);
  const double var = all.m2 / static_cast<double>(all.count - 1);
  est.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(all.count));
  est.samples = all.count;
  est.seed = opts.seed;
  return est;
}

inline std::int64_t draw_binomial(std::int64_t trials, double p, SplitMix64& rng) {
  if (trials <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<std::int64_t> dist(trials, p);
  return dist(rng);
}

}  // namespace detail

// Generic scenarios: draw a configuration with u pinned to d, take the
// adversary's view of it and compute the exact posterior.
inline Estimate estimate_expected_posterior(const Scenario& s, PosteriorQuery q,
                                            const McOptions& opts,
                                            const SizeLimits& limits = {}) {
  detail::check_query(s, q);
  detail::check_size("estimate_expected_posterior", s.users(), s.dest_count(), limits.mc_users,
                     limits.mc_dests);
  detail::require_positive_prior(s, q);
  const DestinationPin pin{q.user, q.dest};
  return detail::run_estimate(opts, [&](std::uint64_t sample_seed) {
    const Configuration c = sample_configuration(s, sample_seed, pin);
    return posterior(s, observe(s, c), q);
  });
}

// Worst-case population: counts are drawn from their binomial laws directly.
inline Estimate estimate_worst_case(const WorstCasePopulation& pop, const McOptions& opts) {
  validate(pop);
  const double b = pop.b;
  const auto ne = static_cast<std::int64_t>(pop.users_on_d());
  const auto nf = static_cast<std::int64_t>(pop.users_on_min());
  return detail::run_estimate(opts, [&](std::uint64_t sample_seed) {
    SplitMix64 rng(sample_seed);
    const bool u_in = rng.bernoulli(b);
    const bool u_out = rng.bernoulli(b);
    const auto e = detail::draw_binomial(ne, 1.0 - b, rng);
    const auto f = detail::draw_binomial(nf, 1.0 - b, rng);
    const auto k = detail::draw_binomial(e, b, rng);
    const auto j = detail::draw_binomial(f, b, rng);
    if (u_in) return u_out ? 1.0 : pop.p_u_d;
    return psi2(static_cast<std::size_t>(e), static_cast<std::size_t>(f),
                static_cast<std::size_t>(j), static_cast<std::size_t>(k + (u_out ? 1 : 0)),
                pop.p_u_d, pop.p_u_min);
  });
}

// Common-distribution population: s - 1 other unobserved inputs, of which
// some have observed outputs, of which some went to d.
inline Estimate estimate_common(const CommonPopulation& pop, const McOptions& opts) {
  validate(pop);
  const double b = pop.b;
  const double pd = pop.p[pop.d];
  const auto others = static_cast<std::int64_t>(pop.n - 1);
  return detail::run_estimate(opts, [&](std::uint64_t sample_seed) {
    SplitMix64 rng(sample_seed);
    const bool u_in = rng.bernoulli(b);
    const bool u_out = rng.bernoulli(b);
    const auto hidden_in = detail::draw_binomial(others, 1.0 - b, rng);
    const auto seen_out = detail::draw_binomial(hidden_in, b, rng);
    const auto to_d = detail::draw_binomial(seen_out, pd, rng);
    if (u_in) return u_out ? 1.0 : pd;
    const auto s = static_cast<std::size_t>(hidden_in + 1);
    const auto t = static_cast<std::size_t>(seen_out + (u_out ? 1 : 0));
    const auto c = static_cast<std::size_t>(to_d + (u_out ? 1 : 0));
    return psi4(s, t, c, pd);
  });
}

}  // namespace onion_anon
