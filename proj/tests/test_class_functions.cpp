#include <doctest.h>

#include <cmath>
#include <sstream>

#include "efkp/class_functions.hpp"
#include "efkp/numeric.hpp"

using namespace efkp;

TEST_CASE("iterated logarithms") {
  CHECK(iter_log(1, kE) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(iter_log(2, std::exp(kE)) == doctest::Approx(1.0).epsilon(1e-15));
  const long double ref = std::log(std::log(std::log(1e6L)));
  CHECK(iter_log(3, 1e6) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
  CHECK(iter_log(3, 1e6) == doctest::Approx(0.96538253).epsilon(1e-8));
  CHECK_THROWS_AS(iter_log(3, 2.0), std::domain_error);
}

TEST_CASE("built-in boundaries at e^(e^e)") {
  const double n = std::exp(std::exp(kE));
  const long double e = std::exp(1.0L);
  CHECK(psi_lower(n) == doctest::Approx(static_cast<double>(std::sqrt(2 * e + 3))).epsilon(1e-13));
  CHECK(psi_upper(n) == doctest::Approx(static_cast<double>(std::sqrt(2 * e + 4))).epsilon(1e-13));
  CHECK(psi_lower(n) == doctest::Approx(2.90457633).epsilon(1e-8));
  CHECK(psi_upper(n) == doctest::Approx(3.07189903).epsilon(1e-8));
}

TEST_CASE("upper exceeds lower wherever both are defined") {
  for (double u = 2.8; u < 700.0; u *= 1.05) {
    CHECK(psi_upper_log(u) > psi_lower_log(u));
  }
  CHECK(psi_upper_log(1e6) > psi_lower_log(1e6));
}

TEST_CASE("log-argument forms agree with the direct ones") {
  for (double n : {20.0, 1e3, 1e6, 1e12, 1e100}) {
    CHECK(psi_lower_log(std::log(n)) == doctest::Approx(psi_lower(n)).epsilon(1e-14));
    CHECK(psi_upper_log(std::log(n)) == doctest::Approx(psi_upper(n)).epsilon(1e-14));
  }
}

TEST_CASE("integral of a constant boundary") {
  const auto one = ClassFunction::constant(1.0);
  CHECK(integral_I(one, 1.0, kE).value == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(sum_criterion(one, 1, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("decade integrals shrink for the upper boundary") {
  const auto up = ClassFunction::builtin_upper();
  const double u1 = integral_I(up, 1e6, 1e9).value, u2 = integral_I(up, 1e9, 1e12).value;
  CHECK(u2 < u1);
}

namespace {

// Integral over the block ln ln ln lambda in [j, j+1], in short pieces of ln ln lambda.
double block(const ClassFunction& psi, int j) {
  const double a = std::exp(static_cast<double>(j)), b = std::exp(static_cast<double>(j + 1));
  double total = 0.0;
  for (double t = a; t < b; t += 0.25) {
    total += integral_I_log(psi, std::exp(t), std::exp(std::min(t + 0.25, b))).value;
  }
  return total;
}

}  // namespace

TEST_CASE("triple-exponential blocks: lower boundary stays flat, upper decays") {
  const auto up = ClassFunction::builtin_upper();
  const auto lo = ClassFunction::builtin_lower();
  double prev_up = 0.0;
  for (int j = 1; j <= 4; ++j) {
    const double l = block(lo, j), u = block(up, j);
    CHECK(l > std::sqrt(2.0));
    if (j > 1) CHECK(u < 0.6 * prev_up);
    prev_up = u;
  }
}

TEST_CASE("integral of the upper boundary against a dense trapezoid") {
  const auto up = ClassFunction::builtin_upper();
  const double a = std::log(1e6), b = std::log(1e9);
  const int m = 200000;
  long double acc = 0.0L;
  for (int i = 0; i <= m; ++i) {
    const double u = a + (b - a) * i / m;
    const double p = psi_upper_log(u);
    const long double f = p * std::exp(-0.5 * p * p);
    acc += (i == 0 || i == m) ? f / 2 : f;
  }
  acc *= (b - a) / m;
  CHECK(integral_I(up, 1e6, 1e9).value == doctest::Approx(static_cast<double>(acc)).epsilon(1e-8));
}

TEST_CASE("partial sums bounded by the integral test") {
  const auto up = ClassFunction::builtin_upper();
  const double s = sum_criterion(up, 1000, 1000000);
  const double in = integral_I(up, 999.0, 1000001.0).value;
  CHECK(s <= in);
  CHECK(s >= integral_I(up, 1000.0, 1000001.0).value);
}

TEST_CASE("blocking weights on a halving series") {
  std::vector<double> terms;
  for (int k = 1; k <= 30; ++k) terms.push_back(std::ldexp(1.0, -k));
  auto w = blocking_weights_from_terms(terms, std::ldexp(1.0, -30));
  for (int k = 1; k <= 30; ++k) CHECK(w.a[k - 1] == doctest::Approx(k));
}

TEST_CASE("blocking weights for the upper boundary") {
  const auto psi = ClassFunction::builtin_upper().clipped();
  auto w = build_blocking_weights(psi, 100000);
  REQUIRE(w.k_max() == 100000);
  long double z = 0.0L, psum = 0.0L;
  for (std::int64_t k = 1; k <= w.k_max(); ++k) {
    if (k > 1) CHECK(w.a[k - 1] >= w.a[k - 2]);
    z += static_cast<long double>(w.a[k - 1]) * w.term[k - 1];
    psum += w.p[k - 1];
  }
  CHECK(std::isfinite(w.Z));
  CHECK(w.Z == doctest::Approx(static_cast<double>(z)).epsilon(1e-12));
  CHECK(static_cast<double>(psum) <= 1.0 + 1e-12);
}

TEST_CASE("blocking weights reject bad input") {
  CHECK_THROWS_AS(blocking_weights_from_terms({1.0, -1.0}), std::domain_error);
  CHECK_THROWS_AS(blocking_weights_from_terms({1.0, std::nan("")}), std::domain_error);
}

TEST_CASE("clipping keeps a user function between the built-ins") {
  const auto lowc = ClassFunction::constant(1.0).clipped();
  const auto highc = ClassFunction::constant(100.0).clipped();
  const auto mid = ClassFunction::user("mid", [](double l) { return std::sqrt(2.0 * std::log(std::log(l)) + 3.5 * std::log(std::log(std::log(l)))); }).clipped();
  for (double l = 16.0; l < 1e300; l *= 7.3) {
    CHECK(lowc(l) == doctest::Approx(psi_lower(l)).epsilon(1e-14));
    CHECK(highc(l) == doctest::Approx(psi_upper(l)).epsilon(1e-14));
    CHECK(mid(l) >= psi_lower(l) * (1 - 1e-14));
    CHECK(mid(l) <= psi_upper(l) * (1 + 1e-14));
  }
  CHECK(lowc(2.0) == lowc(16.0));
  CHECK(lowc.clip_threshold() == 16.0);
}

TEST_CASE("tabulated boundary interpolates in log lambda") {
  std::istringstream csv("lambda,psi\n10,1\n1000,3\n");
  auto t = ClassFunction::from_csv(csv);
  CHECK(t(100.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t(1.0) == 1.0);
  CHECK(t(1e9) == 3.0);
  CHECK(t.check_monotone(1.0, 1e6));
  CHECK_THROWS(ClassFunction::tabulated({1.0, 2.0}, {2.0, 1.0}));
}

TEST_CASE("built-ins by name") {
  CHECK(ClassFunction::by_name("upper")(1e6) == doctest::Approx(psi_upper(1e6)));
  CHECK(ClassFunction::by_name("lower")(1e6) == doctest::Approx(psi_lower(1e6)));
  CHECK(ClassFunction::builtin_upper().check_monotone(16.0, 1e300));
}
