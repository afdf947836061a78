#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "onion_anon/error.hpp"
#include "onion_anon/model.hpp"
#include "onion_anon/numeric.hpp"
#include "onion_anon/structured.hpp"

namespace onion_anon {

enum class DistributionKind { zipf, uniform, point, explicit_vector };

struct DistributionSpec {
  DistributionKind kind = DistributionKind::uniform;
  std::size_t dest_count = 1;
  double zipf_exponent = 1.0;
  DestId point = 0;
  std::vector<double> weights;

  static DistributionSpec zipf(std::size_t dests, double s) {
    return {DistributionKind::zipf, dests, s, 0, {}};
  }
  static DistributionSpec uniform(std::size_t dests) {
    return {DistributionKind::uniform, dests, 1.0, 0, {}};
  }
  static DistributionSpec point_mass(std::size_t dests, DestId d) {
    return {DistributionKind::point, dests, 1.0, d, {}};
  }
  static DistributionSpec explicit_vector(std::vector<double> w) {
    const auto m = w.size();
    return {DistributionKind::explicit_vector, m, 1.0, 0, std::move(w)};
  }
};

namespace detail {

inline double parse_double(std::string_view text, std::string_view context) {
  std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ParseError(std::string(context) + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace detail

// Text forms: "zipf:1.0", "uniform", "point:2", "explicit:0.7,0.3".
// `dest_count` is ignored for explicit vectors, whose length is |dest|.
inline DistributionSpec parse_distribution_spec(std::string_view text, std::size_t dest_count) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (kind == "uniform" && colon == std::string_view::npos) {
    return DistributionSpec::uniform(dest_count);
  }
  if (kind == "zipf" && !arg.empty()) {
    return DistributionSpec::zipf(dest_count, detail::parse_double(arg, "zipf exponent"));
  }
  if (kind == "point" && !arg.empty()) {
    DestId d = 0;
    const auto res = std::from_chars(arg.data(), arg.data() + arg.size(), d);
    if (res.ec != std::errc{} || res.ptr != arg.data() + arg.size()) {
      throw ParseError("point destination is not an index: '" + std::string(arg) + "'");
    }
    return DistributionSpec::point_mass(dest_count, d);
  }
  if (kind == "explicit" && !arg.empty()) {
    std::vector<double> w;
    std::size_t start = 0;
    while (start <= arg.size()) {
      const auto comma = arg.find(',', start);
      const auto piece = arg.substr(start, comma == std::string_view::npos ? arg.size() - start
                                                                           : comma - start);
      w.push_back(detail::parse_double(piece, "explicit weight"));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return DistributionSpec::explicit_vector(std::move(w));
  }
  throw ParseError("unrecognized distribution spec: '" + std::string(text) + "'");
}

inline std::string to_string(const DistributionSpec& spec) {
  switch (spec.kind) {
    case DistributionKind::uniform: return "uniform";
    case DistributionKind::zipf: return "zipf:" + std::to_string(spec.zipf_exponent);
    case DistributionKind::point: return "point:" + std::to_string(spec.point);
    case DistributionKind::explicit_vector: {
      std::string s = "explicit:";
      for (std::size_t i = 0; i < spec.weights.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(spec.weights[i]);
      }
      return s;
    }
  }
  return {};
}

// Probability vector over destination ranks 0..|dest|-1. Zipf gives rank i
// (1-based) mass 1 / (mu i^s) with mu = sum_i 1 / i^s.
inline std::vector<double> make_distribution(const DistributionSpec& spec) {
  if (spec.dest_count == 0) throw ModelError("distribution needs at least one destination");
  const std::size_t m = spec.dest_count;
  std::vector<double> p(m, 0.0);
  switch (spec.kind) {
    case DistributionKind::uniform:
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(m));
      break;
    case DistributionKind::zipf: {
      if (!(spec.zipf_exponent > 0.0)) throw ModelError("zipf exponent must be positive");
      KahanSum mu;
      for (std::size_t i = 0; i < m; ++i) {
        p[i] = std::pow(static_cast<double>(i + 1), -spec.zipf_exponent);
        mu += p[i];
      }
      for (double& x : p) x /= mu.value();
      break;
    }
    case DistributionKind::point:
      if (spec.point >= m) throw ModelError("point destination out of range");
      p[spec.point] = 1.0;
      break;
    case DistributionKind::explicit_vector: {
      KahanSum sum;
      for (double x : spec.weights) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
          throw ModelError("explicit distribution has a negative or non-finite entry");
        }
        sum += x;
      }
      if (std::fabs(sum.value() - 1.0) > kStochasticTolerance) {
        throw ModelError("explicit distribution is not stochastic");
      }
      p = spec.weights;
      break;
    }
  }
  return p;
}

// The destination other than d that u is least likely to visit; ties go to
// the highest index, the last position in a rank ordering by u's prior.
inline DestId least_likely_destination(const std::vector<double>& u_dist, DestId d) {
  if (u_dist.size() < 2) throw ModelError("worst-case population needs at least two destinations");
  DestId best = d == 0 ? 1 : 0;
  for (DestId e = 0; e < u_dist.size(); ++e) {
    if (e == d) continue;
    if (u_dist[e] <= u_dist[best]) best = e;
  }
  return best;
}

// User 0 is u with `u_dist`; round(alpha (n-1)) other users always visit d,
// the rest always visit u's least likely destination.
inline Scenario build_worst_case_scenario(std::size_t n, double alpha, double b,
                                          const std::vector<double>& u_dist, DestId d = 0) {
  if (n < 1) throw ModelError("worst-case scenario needs n >= 1");
  if (d >= u_dist.size()) throw ModelError("queried destination out of range");
  WorstCasePopulation shape{n, alpha, b, 0.0, 0.0};
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ModelError("alpha out of range");
  const std::size_t m = u_dist.size();
  std::vector<std::vector<double>> rows;
  rows.push_back(u_dist);
  if (n > 1) {
    const DestId low = least_likely_destination(u_dist, d);
    for (std::size_t i = 0; i < shape.users_on_d(); ++i) {
      std::vector<double> r(m, 0.0);
      r[d] = 1.0;
      rows.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < shape.users_on_min(); ++i) {
      std::vector<double> r(m, 0.0);
      r[low] = 1.0;
      rows.push_back(std::move(r));
    }
  }
  return validate_scenario(b, std::move(rows));
}

// The structured parameters matching build_worst_case_scenario.
inline WorstCasePopulation worst_case_population(std::size_t n, double alpha, double b,
                                                 const std::vector<double>& u_dist, DestId d = 0) {
  if (d >= u_dist.size()) throw ModelError("queried destination out of range");
  const double p_min = u_dist.size() < 2 ? 0.0 : u_dist[least_likely_destination(u_dist, d)];
  return WorstCasePopulation{n, alpha, b, u_dist[d], p_min};
}

inline Scenario build_common_scenario(std::size_t n, double b, const DistributionSpec& spec) {
  if (n < 1) throw ModelError("common scenario needs n >= 1");
  const auto row = make_distribution(spec);
  return validate_scenario(b, std::vector<std::vector<double>>(n, row));
}

}  // namespace onion_anon
