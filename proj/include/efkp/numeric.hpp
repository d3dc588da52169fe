#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace efkp {

inline constexpr double kE = 2.718281828459045235360287;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// ln(e^a + e^b), exact for infinite arguments.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// ln(sum_i e^{v_i}); -inf for an empty span.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = x > m ? x : m;
  if (m == kNegInf) return kNegInf;
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// ln(e^a - e^b) for a >= b; -inf when equal.
inline double log_sub_exp(double a, double b) {
  if (b == kNegInf) return a;
  if (b >= a) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

/// Shortest round-trip decimal form (17 significant digits).
std::string fmt17(double v);

}  // namespace efkp
