#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

namespace onion_anon {

// Neumaier variant of compensated summation.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  KahanSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// SplitMix64 finalizer. Public constants, stable across platforms.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for the i-th unit of work derived from a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// SplitMix64 stream; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

// Inverse-CDF draw from a probability vector. Entries with zero mass are
// never returned.
inline std::size_t sample_categorical(const std::vector<double>& probs, SplitMix64& rng) {
  const double x = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (x < acc) return i;
  }
  return last_positive;
}

// Probability masses of Binomial(trials, p) for k = 0..trials.
//
// The mode is anchored in log space and the remaining masses are filled by
// ratio recurrences walking outward, so nothing overflows and the tails
// underflow gracefully to zero.
inline std::vector<double> binomial_pmf(std::size_t trials, double p) {
  std::vector<double> pmf(trials + 1, 0.0);
  if (p <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf[trials] = 1.0;
    return pmf;
  }
  const double n = static_cast<double>(trials);
  const auto mode = static_cast<std::size_t>(
      std::min(n, std::floor((n + 1.0) * p)));
  const double m = static_cast<double>(mode);
  const double log_mode = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) -
                          std::lgamma(n - m + 1.0) + m * std::log(p) +
                          (n - m) * std::log1p(-p);
  pmf[mode] = std::exp(log_mode);
  const double odds = p / (1.0 - p);
  for (std::size_t k = mode; k < trials; ++k) {
    pmf[k + 1] = pmf[k] * (n - static_cast<double>(k)) / static_cast<double>(k + 1) * odds;
  }
  for (std::size_t k = mode; k > 0; --k) {
    pmf[k - 1] = pmf[k] * static_cast<double>(k) / (n - static_cast<double>(k) + 1.0) / odds;
  }
  // lgamma of a large argument carries ~1e-12 relative error into the
  // anchor; the shape is exact, so rescale to unit mass.
  KahanSum total;
  for (double x : pmf) total += x;
  for (double& x : pmf) x /= total.value();
  return pmf;
}

// Runs body(chunk) for chunk in [0, chunks) on up to `threads` workers.
// Chunks are handed out statically; callers must store per-chunk results
// and reduce them in chunk order for thread-count-independent output. The
// first exception thrown by any chunk is rethrown on the calling thread.
inline void parallel_chunks(std::size_t chunks, unsigned threads,
                            const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::exception_ptr> failures(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) body(c);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace onion_anon
