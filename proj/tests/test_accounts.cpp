#include <doctest.h>

#include <cmath>
#include <random>

#include "efkp/accounts.hpp"
#include "efkp/numeric.hpp"
#include "efkp/reality.hpp"

using namespace efkp;

namespace {

std::vector<PathEvent> uniform_path(std::uint64_t seed, int n, double c) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PathEvent> p;
  for (int i = 0; i < n; ++i) p.push_back({c, c * u(rng)});
  return p;
}

// Integral over u in [2/e, 1] of prod (1 + u g x_i), by expanding the
// product in long double.
long double exact_mixture(double g, const std::vector<PathEvent>& p, std::size_t rounds) {
  std::vector<long double> coef{1.0L};
  for (std::size_t i = 0; i < rounds; ++i) {
    const long double gx = static_cast<long double>(g) * p[i].x;
    coef.push_back(0.0L);
    for (std::size_t m = coef.size() - 1; m > 0; --m) coef[m] += gx * coef[m - 1];
  }
  const long double lo = 2.0L / std::exp(1.0L);
  long double v = 0.0L;
  for (std::size_t m = 0; m < coef.size(); ++m) {
    v += coef[m] * (1.0L - std::pow(lo, static_cast<long double>(m + 1))) / (m + 1);
  }
  return v;
}

}  // namespace

TEST_CASE("constant-proportion bet and freeze") {
  Account big(0.02, 0.01);
  CHECK(big.bet(1.0, 1) == 0.0);
  CHECK(big.frozen());
  CHECK(big.freeze_round() == 1);
  CHECK(big.bet(0.0, 2) == 0.0);

  Account small(0.001, 0.01);
  CHECK(small.bet(1.0, 1) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK_FALSE(small.frozen());
}

TEST_CASE("freeze round is monotone in gamma") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> cs;
    for (int i = 0; i < 500; ++i) cs.push_back(ex(rng));
    Account a(0.002), b(0.004);
    for (int i = 0; i < 500; ++i) {
      a.bet(cs[i], i + 1);
      b.bet(cs[i], i + 1);
    }
    const auto fa = a.freeze_round().value_or(1 << 30);
    const auto fb = b.freeze_round().value_or(1 << 30);
    CHECK(fa >= fb);
  }
}

TEST_CASE("zero proportion makes the sandwich an equality") {
  Account a(0.0);
  PathStats st;
  for (const auto& e : uniform_path(1, 100, 2.0)) {
    a.bet(e.c, st.n + 1);
    st.push(e);
    a.update(e.x);
  }
  auto r = cp_bound_check(a, st);
  for (const auto& rec : r.records()) {
    CHECK(rec.lhs == 0.0);
    CHECK(rec.rhs == 0.0);
  }
}

TEST_CASE("one-round log sandwich") {
  const double g = 0.005;
  Account a(g);
  a.bet(1.0, 1);
  a.update(1.0);
  PathStats st;
  st.push({1.0, 1.0});
  CHECK(a.log_growth() >= 0.00498738);
  CHECK(a.log_growth() <= 0.00498763);
  CHECK(cp_bound_check(a, st).violations() == 0);
}

TEST_CASE("cp sandwich on random paths") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const double c = 0.5 + static_cast<double>(seed % 5);
    const double g = 0.01 / c * (0.1 + 0.9 * static_cast<double>(seed % 7) / 6.0);
    Account a(g);
    PathStats st;
    BoundReport rep;
    for (const auto& e : uniform_path(seed, 2000, c)) {
      a.bet(e.c, st.n + 1);
      st.push(e);
      a.update(e.x);
      rep.append(cp_bound_check(a, st));
    }
    CHECK(rep.violations() == 0);
  }
}

TEST_CASE("cp check refuses frozen accounts") {
  Account a(0.1);
  a.bet(1.0, 1);
  PathStats st;
  st.push({1.0, 0.0});
  CHECK_THROWS_AS(cp_bound_check(a, st), std::logic_error);
}

TEST_CASE("Gauss-Legendre rule integrates polynomials") {
  auto rule = gauss_legendre(64, kMixtureLower, 1.0);
  REQUIRE(rule.nodes.size() == 64);
  for (std::size_t i = 1; i < rule.nodes.size(); ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  for (int m : {0, 1, 5, 40, 127}) {
    double q = 0.0;
    for (std::size_t j = 0; j < 64; ++j) q += rule.weights[j] * std::pow(rule.nodes[j], m);
    const double exact = (1.0 - std::pow(kMixtureLower, m + 1)) / (m + 1);
    CHECK(q == doctest::Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("mixture initial value and first round") {
  UniformMixtureAccount q(0.1, 1.0);
  CHECK(q.value() == doctest::Approx(1.0 - 2.0 / kE).epsilon(1e-15));
  CHECK(q.value() == doctest::Approx(0.2642411).epsilon(1e-7));
  q.bet(1.0, 1);
  q.update(1.0);
  CHECK(q.value() == doctest::Approx(1.0 - 2.0 / kE + 0.05 * (1.0 - 4.0 / (kE * kE))).epsilon(1e-14));
  CHECK(q.value() == doctest::Approx(0.2871740).epsilon(1e-7));
}

TEST_CASE("quadrature mixture against the expanded polynomial") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double g = 0.05 + 0.005 * static_cast<double>(seed);
    auto p = uniform_path(seed, 64, 1.0);
    UniformMixtureAccount q(g, 1.0, 64, true);
    for (std::size_t n = 0; n < p.size(); ++n) {
      const double before = q.value();
      const double m = q.bet(p[n].c, static_cast<std::int64_t>(n + 1));
      q.update(p[n].x);
      const double after = q.value();
      CHECK(std::abs(after - (before + m * p[n].x)) <= 1e-12 * after);
      const double ref = static_cast<double>(exact_mixture(g, p, n + 1));
      CHECK(std::abs(after - ref) <= 1e-10 * ref);
      CHECK(std::abs(q.exact_value() - ref) <= 1e-10 * ref);
    }
  }
}

TEST_CASE("mixture bounds on random and one-sided paths") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto p = uniform_path(seed, 3000, 1.0);
    if (seed % 3 == 1) for (auto& e : p) e.x = -std::abs(e.x);
    if (seed % 3 == 2) for (auto& e : p) e.x = std::abs(e.x);
    UniformMixtureAccount q(0.005);
    PathStats st;
    BoundReport rep;
    for (const auto& e : p) {
      q.bet(e.c, st.n + 1);
      st.push(e);
      q.update(e.x);
      rep.append(q_upper_bounds(q, st));
    }
    CHECK(rep.violations() == 0);
    CHECK(rep.summarize().count("q_gauss") == 1);
  }
}

TEST_CASE("both mixture cases are evaluated on the boundary") {
  const double g = 0.003;
  auto p = boundary_path(g, 1.0, 1.0, 100, 300, 7);
  UniformMixtureAccount q(g);
  PathStats st;
  BoundReport last;
  for (const auto& e : p) {
    q.bet(e.c, st.n + 1);
    st.push(e);
    q.update(e.x);
    last = q_upper_bounds(q, st);
  }
  CHECK(std::abs(st.S - g * st.A2) <= 1e-12 * g * st.A2);
  int case2 = 0, case3 = 0;
  for (const auto& r : last.records()) {
    if (r.bound_id == "q_mcps" && r.case_id == "2") ++case2;
    if (r.bound_id == "q_mcps" && r.case_id == "3") ++case3;
  }
  CHECK(case2 == 1);
  CHECK(case3 == 1);
  CHECK(last.violations() == 0);
}

TEST_CASE("buy/sell process") {
  BuySellAccount t(0.001);
  CHECK(t.value() == doctest::Approx(kMixtureAlpha).epsilon(1e-15));

  SUBCASE("all-negative path stays within case (i)") {
    PathStats st;
    BoundReport rep;
    for (int i = 0; i < 5000; ++i) {
      t.bet(1.0, st.n + 1);
      st.push({1.0, -0.7});
      t.update(-0.7);
      rep.append(t_bounds(t, st));
    }
    CHECK(rep.violations() == 0);
    CHECK(rep.summarize().count("t_bss") == 1);
    CHECK(rep.records().back().case_id == "i");
  }
  SUBCASE("steep positive path reaches case (iii)") {
    PathStats st;
    BoundReport rep;
    for (int i = 0; i < 5000; ++i) {
      t.bet(1.0, st.n + 1);
      st.push({1.0, 1.0});
      t.update(1.0);
      rep.append(t_bounds(t, st));
    }
    CHECK(rep.violations() == 0);
    CHECK(rep.records().back().case_id == "iii");
  }
  SUBCASE("freezes once gamma e c exceeds delta") {
    CHECK(t.bet(0.01 / (0.001 * kE) * 1.001, 1) == 0.0);
    CHECK(t.frozen());
    CHECK(t.q().frozen());
    const double v = t.value();
    t.update(1.0);
    CHECK(t.value() == v);
  }
}

TEST_CASE("buy/sell accounting identity") {
  BuySellAccount t(0.002);
  auto p = uniform_path(9, 4000, 1.0);
  std::int64_t n = 0;
  for (const auto& e : p) {
    const double before = t.value();
    const double m = t.bet(e.c, ++n);
    t.update(e.x);
    CHECK(t.value() == doctest::Approx(before + m * e.x).epsilon(1e-12));
  }
}

TEST_CASE("skeptic wrappers report matching capital") {
  auto src = make_source("uniform-bounded:c=1,seed=4");
  UniformMixtureSkeptic q(0.004);
  auto t = run_game(q, *src, 3000);
  CHECK(t.summary.max_accounting_residual < 1e-12);
  CHECK(t.summary.final_state.log_capital == doctest::Approx(q.account().log_value()).epsilon(1e-12));
}
