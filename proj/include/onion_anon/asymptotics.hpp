#pragma once

// Large-n limits and simple bounds for E[psi | C_D(u) = d].

#include <cmath>
#include <optional>
#include <string_view>

#include "onion_anon/error.hpp"

namespace onion_anon {

enum class AlphaCase { alpha_zero, alpha_interior, alpha_one };

enum class AlphaEndpoint { alpha_zero, alpha_one };

inline constexpr std::string_view to_string(AlphaCase c) {
  switch (c) {
    case AlphaCase::alpha_zero: return "alpha_zero";
    case AlphaCase::alpha_interior: return "alpha_interior";
    case AlphaCase::alpha_one: return "alpha_one";
  }
  return "?";
}

inline constexpr std::string_view to_string(AlphaEndpoint c) {
  return c == AlphaEndpoint::alpha_zero ? "alpha_zero" : "alpha_one";
}

struct LimitResult {
  double value = 0.0;
  AlphaCase case_tag = AlphaCase::alpha_zero;
  std::string_view error_order = "O(sqrt(log n / n))";
};

// b^2 + (1 - b^2) p: the adversary learns d only by seeing both ends of u's
// circuit and otherwise keeps its prior.
inline double lower_bound(double b, double p_u_d) { return b * b + (1.0 - b * b) * p_u_d; }

// Limit of the worst-case population as n grows, for a fixed fraction alpha
// of the other users on d. The endpoints alpha == 0 and alpha == 1 are
// distinct regimes, compared exactly.
inline LimitResult worst_case_limit(double b, double p_u_d, double p_u_min, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ModelError("alpha out of range");
  if (p_u_d + p_u_min > 1.0 + 1e-12) throw ModelError("p_u_d + p_u_min exceeds 1");
  const double head = b * (1.0 - b) * p_u_d + b * b;
  LimitResult r;
  if (alpha == 0.0) {
    r.case_tag = AlphaCase::alpha_zero;
    r.value = head + (1.0 - b) * (b + (1.0 - b) * (1.0 - b) * p_u_d / (1.0 - b + p_u_min * b));
  } else if (alpha == 1.0) {
    r.case_tag = AlphaCase::alpha_one;
    r.value = head + (1.0 - b) * p_u_d / (1.0 - b + p_u_d * b);
  } else {
    r.case_tag = AlphaCase::alpha_interior;
    r.value = head + (1.0 - b) * p_u_d / (1.0 - b + p_u_d * b + p_u_min * b);
  }
  return r;
}

// Smallest p_u_min for which alpha = 1 is the worst case, or nothing when
// p_u_d (1 + b) <= b makes the condition unsatisfiable.
inline std::optional<double> alpha_one_threshold(double b, double p_u_d) {
  const double den = p_u_d * (1.0 + b) - b;
  if (!(den > 0.0)) return std::nullopt;
  return (1.0 - b) * (1.0 - p_u_d) * (1.0 - p_u_d) / den;
}

inline AlphaEndpoint worst_alpha(double b, double p_u_d, double p_u_min) {
  const auto threshold = alpha_one_threshold(b, p_u_d);
  if (threshold && p_u_min >= *threshold) return AlphaEndpoint::alpha_one;
  return AlphaEndpoint::alpha_zero;
}

// b + (1 - b) p, the alpha = 0 limit when p_u_min is negligible. Equal to
// lower_bound evaluated at compromise fraction sqrt(b).
inline double worst_case_headline(double b, double p_u_d) { return b + (1.0 - b) * p_u_d; }

}  // namespace onion_anon
