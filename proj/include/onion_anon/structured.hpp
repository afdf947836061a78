#pragma once

// Closed-form posteriors for two population shapes where the adversary's
// view collapses to a handful of counts.
//
// Worst case: every user other than u deterministically visits either d
// (a fraction alpha of them) or d_min, the destination u is least likely
// to visit. Among the users with unobserved inputs there are e "d-users"
// and f "d_min-users"; k outputs equal to d and j outputs equal to d_min
// are seen without a linked input.
//
// Common distribution: all users share one destination distribution p. With
// s unobserved inputs of which t have an observed output, count_d of those
// outputs equal to d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "onion_anon/error.hpp"
#include "onion_anon/inference.hpp"
#include "onion_anon/numeric.hpp"

namespace onion_anon {

struct WorstCasePopulation {
  std::size_t n = 1;
  double alpha = 0.0;
  double b = 0.0;
  double p_u_d = 0.0;
  double p_u_min = 0.0;

  // Users other than u that always visit d; the rest always visit d_min.
  std::size_t users_on_d() const {
    return static_cast<std::size_t>(std::lround(alpha * static_cast<double>(n - 1)));
  }
  std::size_t users_on_min() const { return (n - 1) - users_on_d(); }
};

struct CommonPopulation {
  std::size_t n = 1;
  double b = 0.0;
  std::vector<double> p;
  DestId d = 0;
};

struct StructuredOptions {
  unsigned threads = 1;
  // Drop binomial tail masses; the discarded mass per binomial is below
  // kTailMass.
  bool truncate_tails = false;
  static constexpr double kTailMass = 1e-12;
};

inline void validate(const WorstCasePopulation& pop) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (pop.n < 1) throw ModelError("worst-case population needs n >= 1");
  if (!in_unit(pop.alpha)) throw ModelError("alpha out of range");
  if (!in_unit(pop.b)) throw ModelError("b out of range");
  if (!in_unit(pop.p_u_d) || !in_unit(pop.p_u_min)) throw ModelError("prior out of range");
  if (pop.p_u_d + pop.p_u_min > 1.0 + kStochasticTolerance) {
    throw ModelError("p_u_d + p_u_min exceeds 1");
  }
  if (!(pop.p_u_d > 0.0)) {
    throw ModelError("conditioning on a null event: p_u_d is 0");
  }
}

inline void validate(const CommonPopulation& pop) {
  if (pop.n < 1) throw ModelError("common population needs n >= 1");
  if (!(pop.b >= 0.0 && pop.b <= 1.0)) throw ModelError("b out of range");
  if (pop.p.empty()) throw ModelError("common distribution is empty");
  if (pop.d >= pop.p.size()) throw ModelError("queried destination out of range");
  KahanSum sum;
  for (double x : pop.p) {
    if (!(x >= 0.0)) throw ModelError("common distribution has a negative entry");
    sum += x;
  }
  if (std::fabs(sum.value() - 1.0) > kStochasticTolerance) {
    throw ModelError("common distribution is not stochastic");
  }
  if (!(pop.p[pop.d] > 0.0)) throw ModelError("conditioning on a null event: p_d is 0");
}

// Posterior in the worst-case population. k counts every observed output
// equal to d among unobserved-input users, including u's own.
inline double psi2(std::size_t e, std::size_t f, std::size_t j, std::size_t k, double p_u_d,
                   double p_u_min) {
  if (j > f || k > e + 1) {
    std::ostringstream os;
    os << "psi2: counts out of range (e=" << e << ", f=" << f << ", j=" << j << ", k=" << k
       << ")";
    throw ModelError(os.str());
  }
  const double a = static_cast<double>(e + 1 - k);
  const double c = static_cast<double>(f - j + 1);
  const double num = p_u_d * static_cast<double>(e + 1) * c;
  const double den = p_u_d * static_cast<double>(k) * c + p_u_min * static_cast<double>(j) * a + a * c;
  if (!(den > 0.0)) throw ModelError("psi2: degenerate cell (zero denominator)");
  return num / den;
}

namespace detail {

// Index range [lo, hi] of pmf that keeps all but `tail` of its mass.
inline std::pair<std::size_t, std::size_t> support(const std::vector<double>& pmf, bool truncate,
                                                   double tail) {
  std::size_t lo = 0;
  std::size_t hi = pmf.size() - 1;
  if (!truncate) return {lo, hi};
  double dropped = 0.0;
  while (lo < hi) {
    const bool left = pmf[lo] <= pmf[hi];
    const double w = left ? pmf[lo] : pmf[hi];
    if (dropped + w > tail / 2) break;
    dropped += w;
    left ? ++lo : --hi;
  }
  return {lo, hi};
}

}  // namespace detail

// Exact E[psi | C_D(u) = d] for the worst-case population:
//
//   b(1-b) p + b^2 + (1-b) * sum_{e,f,j,k} Bin(n_e,1-b)(e) Bin(n_f,1-b)(f)
//       Bin(f,b)(j) Bin(e,b)(k) [b psi2(e,f,j,k+1) + (1-b) psi2(e,f,j,k)]
inline double worst_case_expected_exact(const WorstCasePopulation& pop,
                                        const SizeLimits& limits = {},
                                        const StructuredOptions& opts = {}) {
  validate(pop);
  if (pop.n > limits.structured_users) {
    std::ostringstream os;
    os << "worst_case_expected_exact: size limit exceeded (n=" << pop.n
       << ", limit " << limits.structured_users << ")";
    throw SizeLimitError(os.str());
  }
  const double b = pop.b;
  const std::size_t ne = pop.users_on_d();
  const std::size_t nf = pop.users_on_min();
  const auto we = binomial_pmf(ne, 1.0 - b);
  const auto wf = binomial_pmf(nf, 1.0 - b);
  std::vector<std::vector<double>> wk(ne + 1);
  std::vector<std::vector<double>> wj(nf + 1);
  for (std::size_t e = 0; e <= ne; ++e) wk[e] = binomial_pmf(e, b);
  for (std::size_t f = 0; f <= nf; ++f) wj[f] = binomial_pmf(f, b);

  const double tail = StructuredOptions::kTailMass;
  const auto [e_lo, e_hi] = detail::support(we, opts.truncate_tails, tail);
  const auto [f_lo, f_hi] = detail::support(wf, opts.truncate_tails, tail);

  std::vector<double> row_sum(ne + 1, 0.0);
  parallel_chunks(ne + 1, opts.threads, [&](std::size_t e) {
    if (e < e_lo || e > e_hi || we[e] == 0.0) return;
    const auto [k_lo, k_hi] = detail::support(wk[e], opts.truncate_tails, tail);
    KahanSum over_f;
    for (std::size_t f = f_lo; f <= f_hi; ++f) {
      if (wf[f] == 0.0) continue;
      const auto [j_lo, j_hi] = detail::support(wj[f], opts.truncate_tails, tail);
      KahanSum over_j;
      for (std::size_t j = j_lo; j <= j_hi; ++j) {
        if (wj[f][j] == 0.0) continue;
        KahanSum over_k;
        for (std::size_t k = k_lo; k <= k_hi; ++k) {
          const double w = wk[e][k];
          if (w == 0.0) continue;
          double cell = 0.0;
          if (b > 0.0) cell += b * psi2(e, f, j, k + 1, pop.p_u_d, pop.p_u_min);
          if (b < 1.0) cell += (1.0 - b) * psi2(e, f, j, k, pop.p_u_d, pop.p_u_min);
          over_k += w * cell;
        }
        over_j += wj[f][j] * over_k.value();
      }
      over_f += wf[f] * over_j.value();
    }
    row_sum[e] = we[e] * over_f.value();
  });

  KahanSum inner;
  for (double x : row_sum) inner += x;
  const double value = b * (1.0 - b) * pop.p_u_d + b * b + (1.0 - b) * inner.value();
  return std::clamp(value, 0.0, 1.0);
}

// Posterior in the common-distribution population.
inline double psi4(std::size_t s, std::size_t t, std::size_t count_d, double p_d) {
  if (s == 0) throw ModelError("psi4: s must be at least 1");
  if (t > s || count_d > t) throw ModelError("psi4: counts out of range");
  return (static_cast<double>(count_d) + p_d * static_cast<double>(s - t)) /
         static_cast<double>(s);
}

// Exact E[psi | C_D(u) = d] for the common-distribution population, in the
// reduced single-sum form over s = number of unobserved inputs:
//
//   b^2 + b(1-b) p_d + (1-b) sum_{s=1}^{n} Bin(n-1, 1-b)(s-1)
//       [b (p_d (s-1) + 1) / s + (1-b) p_d]
inline double common_expected_exact(const CommonPopulation& pop, const SizeLimits& limits = {}) {
  validate(pop);
  if (pop.n > limits.structured_users) {
    std::ostringstream os;
    os << "common_expected_exact: size limit exceeded (n=" << pop.n << ", limit "
       << limits.structured_users << ")";
    throw SizeLimitError(os.str());
  }
  const double b = pop.b;
  const double pd = pop.p[pop.d];
  const auto ws = binomial_pmf(pop.n - 1, 1.0 - b);
  KahanSum sum;
  for (std::size_t s = 1; s <= pop.n; ++s) {
    const double w = ws[s - 1];
    if (w == 0.0) continue;
    const double sd = static_cast<double>(s);
    sum += w * (b * (pd * (sd - 1.0) + 1.0) / sd + (1.0 - b) * pd);
  }
  const double value = b * b + b * (1.0 - b) * pd + (1.0 - b) * sum.value();
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace onion_anon
