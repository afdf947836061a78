#pragma once

// Scenarios, configurations and the adversary's view of one round of the
// black-box onion-routing functionality.
//
// Every user opens exactly one circuit. The adversary sees the circuit's
// input with probability b and, independently, its output with
// probability b:
//   neither seen      -> nothing but the fact that a circuit exists
//   input only        -> the user
//   output only       -> the destination
//   both              -> the (user, destination) link

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "onion_anon/error.hpp"
#include "onion_anon/numeric.hpp"

namespace onion_anon {

using UserId = std::uint32_t;
using DestId = std::uint32_t;

inline constexpr double kStochasticTolerance = 1e-12;

class Scenario {
 public:
  std::size_t users() const { return rows_.size(); }
  std::size_t dest_count() const { return dest_count_; }
  double b() const { return b_; }
  double prob(UserId u, DestId d) const { return rows_[u][d]; }
  const std::vector<double>& row(UserId u) const { return rows_[u]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  friend bool operator==(const Scenario&, const Scenario&) = default;

 private:
  Scenario(double b, std::size_t dest_count, std::vector<std::vector<double>> rows)
      : b_(b), dest_count_(dest_count), rows_(std::move(rows)) {}

  friend Scenario validate_scenario(double, std::vector<std::vector<double>>,
                                    const std::vector<std::string>&);

  double b_ = 0.0;
  std::size_t dest_count_ = 0;
  std::vector<std::vector<double>> rows_;
};

// Checks and normalizes raw scenario data. `user_names`, when given, is used
// to name the offending row in diagnostics.
inline Scenario validate_scenario(double b, std::vector<std::vector<double>> rows,
                                  const std::vector<std::string>& user_names = {}) {
  auto label = [&](std::size_t u) {
    std::ostringstream os;
    if (u < user_names.size()) {
      os << "user '" << user_names[u] << "' (row " << u << ")";
    } else {
      os << "user row " << u;
    }
    return os.str();
  };
  if (!(b >= 0.0 && b <= 1.0)) {
    std::ostringstream os;
    os << "b out of range: " << b << " not in [0,1]";
    throw ModelError(os.str());
  }
  if (rows.empty()) throw ModelError("scenario has zero users");
  const std::size_t dests = rows.front().size();
  if (dests == 0) throw ModelError("scenario has zero destinations");
  for (std::size_t u = 0; u < rows.size(); ++u) {
    auto& row = rows[u];
    if (row.size() != dests) {
      std::ostringstream os;
      os << label(u) << ": expected " << dests << " probabilities, got " << row.size();
      throw ModelError(os.str());
    }
    KahanSum sum;
    for (double x : row) {
      if (!std::isfinite(x) || x < 0.0) {
        throw ModelError(label(u) + ": negative or non-finite probability");
      }
      sum += x;
    }
    if (std::fabs(sum.value() - 1.0) > kStochasticTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << label(u) << ": row not stochastic (sum " << sum.value() << ")";
      throw ModelError(os.str());
    }
    for (double& x : row) x /= sum.value();
  }
  return Scenario(b, dests, std::move(rows));
}

// C_D, C_I, C_O for every user.
struct Configuration {
  std::vector<DestId> dest;
  std::vector<std::uint8_t> input_observed;
  std::vector<std::uint8_t> output_observed;

  std::size_t users() const { return dest.size(); }
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// Multiset over destinations, stored as a multiplicity vector.
class DestMultiset {
 public:
  DestMultiset() = default;
  explicit DestMultiset(std::size_t dest_count) : counts_(dest_count, 0) {}

  static DestMultiset from_counts(std::vector<std::uint32_t> counts) {
    DestMultiset m;
    m.counts_ = std::move(counts);
    for (auto c : m.counts_) m.size_ += c;
    return m;
  }

  static DestMultiset from_elements(std::size_t dest_count, const std::vector<DestId>& items) {
    DestMultiset m(dest_count);
    for (DestId d : items) m.add(d);
    return m;
  }

  void add(DestId d) {
    ++counts_.at(d);
    ++size_;
  }

  void remove_one(DestId d) {
    if (counts_.at(d) == 0) throw ModelError("removing a destination not in the multiset");
    --counts_[d];
    --size_;
  }

  std::uint32_t count(DestId d) const { return counts_.at(d); }
  std::size_t size() const { return size_; }
  std::size_t dest_count() const { return counts_.size(); }
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  void clear() {
    std::fill(counts_.begin(), counts_.end(), 0);
    size_ = 0;
  }

  friend bool operator==(const DestMultiset&, const DestMultiset&) = default;
  friend auto operator<=>(const DestMultiset&, const DestMultiset&) = default;

 private:
  std::vector<std::uint32_t> counts_;
  std::size_t size_ = 0;
};

// The adversary's view, in canonical form: linked pairs sorted by user,
// input-only users sorted, output-only destinations as a count vector.
struct Observation {
  std::vector<std::pair<UserId, DestId>> linked;
  std::vector<UserId> input_only;
  DestMultiset output_only;
  std::size_t hidden_count = 0;

  // Users whose input the adversary did not see.
  std::size_t unobserved_inputs() const { return output_only.size() + hidden_count; }

  std::size_t users() const {
    return linked.size() + input_only.size() + output_only.size() + hidden_count;
  }

  // Flat integer key; equal keys iff equal observations.
  std::vector<std::int64_t> key() const {
    std::vector<std::int64_t> k;
    k.reserve(2 * linked.size() + input_only.size() + output_only.dest_count() + 4);
    k.push_back(static_cast<std::int64_t>(linked.size()));
    for (auto [u, d] : linked) {
      k.push_back(u);
      k.push_back(d);
    }
    k.push_back(static_cast<std::int64_t>(input_only.size()));
    for (auto u : input_only) k.push_back(u);
    for (auto c : output_only.counts()) k.push_back(c);
    k.push_back(static_cast<std::int64_t>(hidden_count));
    return k;
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct DestinationPin {
  UserId user;
  DestId dest;
};

inline void check_configuration(const Scenario& s, const Configuration& c) {
  const auto n = s.users();
  if (c.dest.size() != n || c.input_observed.size() != n || c.output_observed.size() != n) {
    throw ModelError("configuration size does not match scenario user count");
  }
  for (auto d : c.dest) {
    if (d >= s.dest_count()) throw ModelError("configuration destination out of range");
  }
}

// Checks an observation's shape against the scenario: indices in range,
// user sets disjoint, and every user accounted for exactly once.
inline void check_observation(const Scenario& s, const Observation& o) {
  if (o.output_only.dest_count() != s.dest_count()) {
    throw ModelError("observation destination count does not match scenario");
  }
  if (o.users() != s.users()) {
    throw ModelError("observation accounts for a different number of users than the scenario");
  }
  std::vector<std::uint8_t> seen(s.users(), 0);
  auto mark = [&](UserId u) {
    if (u >= s.users()) throw ModelError("observation user out of range");
    if (seen[u]++) throw ModelError("observation lists a user more than once");
  };
  for (auto [u, d] : o.linked) {
    mark(u);
    if (d >= s.dest_count()) throw ModelError("observation destination out of range");
  }
  for (auto u : o.input_only) mark(u);
}

// Draws a configuration from the prior using only `seed`. A pin fixes one
// user's destination, which conditions exactly on {C_D(user) = dest} since
// destinations are independent across users.
inline Configuration sample_configuration(const Scenario& s, std::uint64_t seed,
                                          std::optional<DestinationPin> pin = std::nullopt) {
  if (pin && (pin->user >= s.users() || pin->dest >= s.dest_count())) {
    throw ModelError("pinned user or destination out of range");
  }
  SplitMix64 rng(seed);
  const auto n = s.users();
  Configuration c;
  c.dest.resize(n);
  c.input_observed.resize(n);
  c.output_observed.resize(n);
  for (UserId u = 0; u < n; ++u) {
    const std::size_t drawn = sample_categorical(s.row(u), rng);
    c.dest[u] = (pin && pin->user == u) ? pin->dest : static_cast<DestId>(drawn);
    c.input_observed[u] = rng.bernoulli(s.b());
    c.output_observed[u] = rng.bernoulli(s.b());
  }
  return c;
}

// Fills `out` in place; reuses its storage.
inline void observe_into(const Scenario& s, const Configuration& c, Observation& out) {
  out.linked.clear();
  out.input_only.clear();
  if (out.output_only.dest_count() != s.dest_count()) {
    out.output_only = DestMultiset(s.dest_count());
  } else {
    out.output_only.clear();
  }
  out.hidden_count = 0;
  for (UserId u = 0; u < c.users(); ++u) {
    const bool in = c.input_observed[u];
    const bool outp = c.output_observed[u];
    if (in && outp) {
      out.linked.emplace_back(u, c.dest[u]);
    } else if (in) {
      out.input_only.push_back(u);
    } else if (outp) {
      out.output_only.add(c.dest[u]);
    } else {
      ++out.hidden_count;
    }
  }
}

inline Observation observe(const Scenario& s, const Configuration& c) {
  check_configuration(s, c);
  Observation o;
  observe_into(s, c, o);
  return o;
}

inline double configuration_prior(const Scenario& s, const Configuration& c) {
  check_configuration(s, c);
  const double b = s.b();
  double w = 1.0;
  for (UserId u = 0; u < c.users(); ++u) {
    w *= s.prob(u, c.dest[u]);
    w *= c.input_observed[u] ? b : 1.0 - b;
    w *= c.output_observed[u] ? b : 1.0 - b;
  }
  return w;
}

inline bool indistinguishable(const Scenario& s, const Configuration& c1, const Configuration& c2) {
  return observe(s, c1) == observe(s, c2);
}

// Visits all (4 |dest|)^n configurations in odometer order. The same
// Configuration object is mutated between calls.
inline void for_each_configuration(std::size_t users, std::size_t dest_count,
                                   const std::function<void(const Configuration&)>& visit) {
  Configuration c;
  c.dest.assign(users, 0);
  c.input_observed.assign(users, 0);
  c.output_observed.assign(users, 0);
  const std::uint32_t per_user = static_cast<std::uint32_t>(4 * dest_count);
  std::vector<std::uint32_t> digit(users, 0);
  while (true) {
    visit(c);
    std::size_t i = 0;
    for (; i < users; ++i) {
      if (++digit[i] < per_user) break;
      digit[i] = 0;
    }
    if (i == users) return;
    for (std::size_t k = 0; k <= i; ++k) {
      c.dest[k] = digit[k] / 4;
      c.input_observed[k] = (digit[k] >> 1) & 1u;
      c.output_observed[k] = digit[k] & 1u;
    }
  }
}

}  // namespace onion_anon
