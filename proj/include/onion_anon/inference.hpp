#pragma once

// Exact posterior of the relationship (u, d) given the adversary's view,
// and its expectation conditioned on u actually choosing d.
//
// For a user u whose input is unobserved, the posterior only depends on the
// set S of users with unobserved inputs and the multiset D0 of destinations
// seen without a linked input:
//
//   psi = (f1 + f2) / f0
//
// where f0 weighs every way of explaining D0 by distinct users of S, f1 the
// explanations in which u produced one copy of d, and f2 those in which u's
// output is hidden while u chose d. All three share the prefactor
// b^(n-|S|+|D0|) (1-b)^(2|S|-|D0|), which cancels in psi.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "onion_anon/error.hpp"
#include "onion_anon/model.hpp"
#include "onion_anon/numeric.hpp"

namespace onion_anon {

struct PosteriorQuery {
  UserId user = 0;
  DestId dest = 0;
};

struct UnobservedView {
  std::vector<UserId> users;  // S
  DestMultiset delta0;        // D0
};

struct FComponents {
  double f0 = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
};

// Problem-size ceilings for the exponential-time routines. Knobs, not
// constants; the CLI can raise them from ONION_ANON_SIZE_LIMITS.
struct SizeLimits {
  std::size_t formula_users = 10;
  std::size_t formula_dests = 6;
  std::size_t oracle_users = 6;
  std::size_t oracle_dests = 4;
  std::size_t expected_oracle_users = 5;
  std::size_t expected_oracle_dests = 4;
  std::size_t structured_users = 300;
  std::size_t mc_users = 40;
  std::size_t mc_dests = 6;

  // Parses "key=value,key=value". Values only ever raise a limit.
  static SizeLimits from_string(const std::string& text) {
    SizeLimits lim;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ParseError("size limit entry without '=': " + item);
      const std::string key = item.substr(0, eq);
      std::size_t value = 0;
      try {
        value = std::stoul(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw ParseError("size limit value is not an integer: " + item);
      }
      std::size_t* slot = nullptr;
      if (key == "formula_users") slot = &lim.formula_users;
      else if (key == "formula_dests") slot = &lim.formula_dests;
      else if (key == "oracle_users") slot = &lim.oracle_users;
      else if (key == "oracle_dests") slot = &lim.oracle_dests;
      else if (key == "expected_oracle_users") slot = &lim.expected_oracle_users;
      else if (key == "expected_oracle_dests") slot = &lim.expected_oracle_dests;
      else if (key == "structured_users") slot = &lim.structured_users;
      else if (key == "mc_users") slot = &lim.mc_users;
      else if (key == "mc_dests") slot = &lim.mc_dests;
      else throw ParseError("unknown size limit key: " + key);
      *slot = std::max(*slot, value);
    }
    return lim;
  }

  static SizeLimits from_env() {
    const char* env = std::getenv("ONION_ANON_SIZE_LIMITS");
    return env ? from_string(env) : SizeLimits{};
  }
};

namespace detail {

inline void check_size(const char* what, std::size_t users, std::size_t dests,
                       std::size_t max_users, std::size_t max_dests) {
  if (users > max_users || dests > max_dests) {
    std::ostringstream os;
    os << what << ": size limit exceeded (n=" << users << ", |dest|=" << dests
       << "; limit n<=" << max_users << ", |dest|<=" << max_dests << ")";
    throw SizeLimitError(os.str());
  }
}

inline void check_query(const Scenario& s, PosteriorQuery q) {
  if (q.user >= s.users() || q.dest >= s.dest_count()) {
    throw ModelError("query user or destination out of range");
  }
}

inline double require_positive_prior(const Scenario& s, PosteriorQuery q) {
  const double p = s.prob(q.user, q.dest);
  if (!(p > 0.0)) {
    throw ModelError("conditioning on a null event: prior of the queried destination is 0");
  }
  return p;
}

inline double common_prefactor(double b, std::size_t n, std::size_t s, std::size_t d0) {
  return std::pow(b, static_cast<double>(n - s + d0)) *
         std::pow(1.0 - b, static_cast<double>(2 * s - d0));
}

// All multisets of total size <= max_size over `dests` symbols, ordered by
// size and, within a size, lexicographically by count vector
// (stars-and-bars order). pred(i, d) is the index of multiset i with one
// copy of d removed, or npos.
class MultisetTable {
 public:
  static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

  MultisetTable(std::size_t dests, std::size_t max_size) : dests_(dests) {
    std::vector<std::uint32_t> counts(dests, 0);
    for (std::size_t total = 0; total <= max_size; ++total) {
      emit(counts, 0, total);
    }
    pred_.assign(size() * dests_, npos);
    std::map<std::vector<std::uint32_t>, std::uint32_t> index;
    for (std::uint32_t i = 0; i < size(); ++i) index.emplace(counts_of(i), i);
    for (std::uint32_t i = 0; i < size(); ++i) {
      auto c = counts_of(i);
      for (std::size_t d = 0; d < dests_; ++d) {
        if (c[d] == 0) continue;
        --c[d];
        pred_[i * dests_ + d] = index.at(c);
        ++c[d];
      }
    }
  }

  std::uint32_t size() const { return static_cast<std::uint32_t>(totals_.size()); }
  std::size_t dests() const { return dests_; }
  std::size_t total(std::uint32_t i) const { return totals_[i]; }
  std::uint32_t count(std::uint32_t i, std::size_t d) const { return flat_[i * dests_ + d]; }
  std::uint32_t pred(std::uint32_t i, std::size_t d) const { return pred_[i * dests_ + d]; }

  std::vector<std::uint32_t> counts_of(std::uint32_t i) const {
    return {flat_.begin() + static_cast<std::ptrdiff_t>(i * dests_),
            flat_.begin() + static_cast<std::ptrdiff_t>((i + 1) * dests_)};
  }

 private:
  void emit(std::vector<std::uint32_t>& counts, std::size_t pos, std::size_t remaining) {
    if (pos + 1 == dests_) {
      counts[pos] = static_cast<std::uint32_t>(remaining);
      flat_.insert(flat_.end(), counts.begin(), counts.end());
      std::size_t t = 0;
      for (auto c : counts) t += c;
      totals_.push_back(t);
      return;
    }
    for (std::size_t c = remaining + 1; c-- > 0;) {
      counts[pos] = static_cast<std::uint32_t>(c);
      emit(counts, pos + 1, remaining - c);
    }
    counts[pos] = 0;
  }

  std::size_t dests_;
  std::vector<std::uint32_t> flat_;
  std::vector<std::size_t> totals_;
  std::vector<std::uint32_t> pred_;
};

// Multiplies poly (indexed by `table`) by (1 + sum_d row[d] x_d) in place.
// The coefficient of multiset M afterwards is the injection sum of the
// users folded in so far onto M.
inline void fold_user(const MultisetTable& table, std::span<const double> row,
                      std::vector<double>& poly) {
  for (std::uint32_t i = table.size(); i-- > 1;) {
    double acc = poly[i];
    for (std::size_t d = 0; d < table.dests(); ++d) {
      const auto j = table.pred(i, d);
      if (j != MultisetTable::npos && row[d] != 0.0) acc += poly[j] * row[d];
    }
    poly[i] = acc;
  }
}

}  // namespace detail

// Product of the factorials of the multiplicities.
inline std::uint64_t rho(const DestMultiset& delta0) {
  std::uint64_t r = 1;
  for (auto c : delta0.counts()) {
    for (std::uint64_t k = 2; k <= c; ++k) {
      if (r > std::numeric_limits<std::uint64_t>::max() / k) {
        throw ModelError("rho overflows 64 bits");
      }
      r *= k;
    }
  }
  return r;
}

// Sum over subsets T of `users` with |T| = |D0| and injections of T onto the
// slots of D0 of prod p^v_pi(v), divided by rho(D0). Equivalently: the total
// weight of assigning distinct users to the elements of D0, where copies of
// the same destination are interchangeable.
//
// Dynamic program over users; the state is the multiplicity vector of D0
// still to be explained, packed mixed-radix.
inline double injection_sum(const std::vector<std::vector<double>>& p,
                            std::span<const UserId> users, const DestMultiset& delta0) {
  if (delta0.size() > users.size()) return 0.0;
  if (delta0.size() == 0) return 1.0;
  const auto& counts = delta0.counts();
  const std::size_t m = counts.size();
  std::vector<std::size_t> stride(m);
  std::size_t states = 1;
  for (std::size_t d = 0; d < m; ++d) {
    stride[d] = states;
    states *= counts[d] + 1;
  }
  std::vector<double> dp(states, 0.0);
  dp[states - 1] = 1.0;
  std::vector<std::uint32_t> rem(m);
  for (UserId v : users) {
    const auto& row = p.at(v);
    // Ascending order: every update targets a smaller index that has
    // already been read for this user.
    for (std::size_t s = 1; s < states; ++s) {
      const double w = dp[s];
      if (w == 0.0) continue;
      std::size_t x = s;
      for (std::size_t d = 0; d < m; ++d) {
        rem[d] = static_cast<std::uint32_t>(x % (counts[d] + 1));
        x /= counts[d] + 1;
      }
      for (std::size_t d = 0; d < m; ++d) {
        if (rem[d] > 0 && row[d] != 0.0) dp[s - stride[d]] += w * row[d];
      }
    }
  }
  return dp[0];
}

inline FComponents f_components(const Scenario& s, const UnobservedView& view,
                                PosteriorQuery q) {
  detail::check_query(s, q);
  std::vector<UserId> rest;
  bool has_u = false;
  for (UserId v : view.users) {
    if (v == q.user) {
      has_u = true;
    } else {
      rest.push_back(v);
    }
  }
  if (!has_u) throw ModelError("f_components: queried user is not in the unobserved set S");
  const std::size_t S = view.users.size();
  const std::size_t k = view.delta0.size();
  FComponents f;
  if (k > S) return f;
  const double pref = detail::common_prefactor(s.b(), s.users(), S, k);
  const double pud = s.prob(q.user, q.dest);
  f.f0 = pref * injection_sum(s.rows(), view.users, view.delta0);
  if (view.delta0.count(q.dest) > 0) {
    DestMultiset reduced = view.delta0;
    reduced.remove_one(q.dest);
    f.f1 = pref * pud * injection_sum(s.rows(), rest, reduced);
  }
  f.f2 = pref * pud * injection_sum(s.rows(), rest, view.delta0);
  return f;
}

namespace detail {

// Prior probability of the observation up to the injection-sum factor of
// the unobserved-input users: zero iff something in it is impossible.
inline double observation_weight_without_injections(const Scenario& s, const Observation& o) {
  const double b = s.b();
  double w = std::pow(b, static_cast<double>(2 * o.linked.size() + o.input_only.size() +
                                             o.output_only.size())) *
             std::pow(1.0 - b, static_cast<double>(o.input_only.size() + 2 * o.hidden_count +
                                                   o.output_only.size()));
  for (auto [v, e] : o.linked) w *= s.prob(v, e);
  return w;
}

}  // namespace detail

inline UnobservedView unobserved_view(const Scenario& s, const Observation& o) {
  std::vector<std::uint8_t> observed(s.users(), 0);
  for (auto [v, e] : o.linked) observed[v] = 1;
  for (auto v : o.input_only) observed[v] = 1;
  UnobservedView view;
  view.delta0 = o.output_only;
  for (UserId v = 0; v < s.users(); ++v) {
    if (!observed[v]) view.users.push_back(v);
  }
  return view;
}

// Pr[C_D(u) = d | view].
inline double posterior(const Scenario& s, const Observation& o, PosteriorQuery q) {
  detail::check_query(s, q);
  check_observation(s, o);
  if (detail::observation_weight_without_injections(s, o) == 0.0) {
    throw ImpossibleObservation("observation has zero prior probability");
  }
  for (auto [v, e] : o.linked) {
    if (v == q.user) return e == q.dest ? 1.0 : 0.0;
  }
  const UnobservedView view = unobserved_view(s, o);
  const double i0 = injection_sum(s.rows(), view.users, view.delta0);
  if (!(i0 > 0.0)) throw ImpossibleObservation("observation has zero prior probability");
  for (auto v : o.input_only) {
    if (v == q.user) return s.prob(q.user, q.dest);
  }
  const FComponents f = f_components(s, view, q);
  if (!(f.f0 > 0.0)) throw ImpossibleObservation("observation has zero prior probability");
  return std::min(1.0, (f.f1 + f.f2) / f.f0);
}

// Bayes by exhaustive enumeration: weight of configurations whose view
// equals `o` and in which u chose d, over the weight of all of them.
inline double posterior_oracle(const Scenario& s, const Observation& o, PosteriorQuery q,
                               const SizeLimits& limits = {}) {
  detail::check_query(s, q);
  check_observation(s, o);
  detail::check_size("posterior_oracle", s.users(), s.dest_count(), limits.oracle_users,
                     limits.oracle_dests);
  KahanSum total;
  KahanSum hit;
  Observation scratch;
  for_each_configuration(s.users(), s.dest_count(), [&](const Configuration& c) {
    observe_into(s, c, scratch);
    if (!(scratch == o)) return;
    const double w = configuration_prior(s, c);
    total += w;
    if (c.dest[q.user] == q.dest) hit += w;
  });
  if (!(total.value() > 0.0)) {
    throw ImpossibleObservation("no configuration with positive prior produces the observation");
  }
  return hit.value() / total.value();
}

// E[psi | C_D(u) = d] as an explicit sum over the unobserved-input set S
// (every subset containing u) and every multiset D0 with |D0| <= |S|.
//
// For each S the injection sums onto all D0 at once come from folding the
// users of S - u into a polynomial over multisets, then folding u. The
// contribution of one (S, D0) cell is
//   pref * p^u_d * (I(S-u, D0-d) + I(S-u, D0))^2 / I(S, D0).
inline double expected_posterior_formula(const Scenario& s, PosteriorQuery q,
                                         const SizeLimits& limits = {}, unsigned threads = 1) {
  detail::check_query(s, q);
  detail::check_size("expected_posterior_formula", s.users(), s.dest_count(),
                     limits.formula_users, limits.formula_dests);
  const double pud = detail::require_positive_prior(s, q);
  const double b = s.b();
  const std::size_t n = s.users();
  const std::size_t m = s.dest_count();

  std::vector<UserId> others;
  for (UserId v = 0; v < n; ++v) {
    if (v != q.user) others.push_back(v);
  }
  const detail::MultisetTable table(m, n);
  const std::size_t masks = std::size_t{1} << others.size();
  std::vector<double> per_mask(masks, 0.0);

  constexpr std::size_t kMasksPerChunk = 16;
  const std::size_t chunks = (masks + kMasksPerChunk - 1) / kMasksPerChunk;
  parallel_chunks(chunks, threads, [&](std::size_t chunk) {
    std::vector<double> g(table.size());
    std::vector<double> f(table.size());
    const std::size_t end = std::min(masks, (chunk + 1) * kMasksPerChunk);
    for (std::size_t mask = chunk * kMasksPerChunk; mask < end; ++mask) {
      std::fill(g.begin(), g.end(), 0.0);
      g[0] = 1.0;
      std::size_t set_size = 1;
      for (std::size_t i = 0; i < others.size(); ++i) {
        if (mask >> i & 1u) {
          detail::fold_user(table, s.row(others[i]), g);
          ++set_size;
        }
      }
      f = g;
      detail::fold_user(table, s.row(q.user), f);
      KahanSum acc;
      for (std::uint32_t idx = 0; idx < table.size(); ++idx) {
        const std::size_t k = table.total(idx);
        if (k > set_size) break;
        const double i0 = f[idx];
        if (!(i0 > 0.0)) continue;
        const double i2 = g[idx];
        const auto reduced = table.pred(idx, q.dest);
        const double i1 = reduced == detail::MultisetTable::npos ? 0.0 : g[reduced];
        const double num = i1 + i2;
        if (num == 0.0) continue;
        const double pref = detail::common_prefactor(b, n, set_size, k);
        acc += pref * pud * num * num / i0;
      }
      per_mask[mask] = acc.value();
    }
  });

  KahanSum total;
  total += b * (1.0 - b) * pud;
  total += b * b;
  for (double x : per_mask) total += x;
  return std::clamp(total.value(), 0.0, 1.0);
}

// E[psi | C_D(u) = d] by enumerating every configuration, grouping by the
// adversary's view, and weighting each view's exact Bayes posterior by its
// probability given C_D(u) = d.
inline double expected_posterior_oracle(const Scenario& s, PosteriorQuery q,
                                        const SizeLimits& limits = {}) {
  detail::check_query(s, q);
  detail::check_size("expected_posterior_oracle", s.users(), s.dest_count(),
                     limits.expected_oracle_users, limits.expected_oracle_dests);
  const double pud = detail::require_positive_prior(s, q);

  struct Group {
    KahanSum total;
    KahanSum joint;
  };
  std::map<std::vector<std::int64_t>, Group> groups;
  Observation scratch;
  for_each_configuration(s.users(), s.dest_count(), [&](const Configuration& c) {
    const double w = configuration_prior(s, c);
    if (w == 0.0) return;
    observe_into(s, c, scratch);
    auto& g = groups[scratch.key()];
    g.total += w;
    if (c.dest[q.user] == q.dest) g.joint += w;
  });

  KahanSum e;
  for (const auto& [key, g] : groups) {
    const double joint = g.joint.value();
    if (joint == 0.0) continue;
    // Pr[view | u->d] * Pr[u->d | view]
    e += (joint / pud) * (joint / g.total.value());
  }
  return std::clamp(e.value(), 0.0, 1.0);
}

}  // namespace onion_anon
