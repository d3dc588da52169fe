#include <doctest.h>

#include <cmath>
#include <random>

#include "efkp/accounts.hpp"
#include "efkp/numeric.hpp"
#include "efkp/reality.hpp"
#include "efkp/sharpness.hpp"

using namespace efkp;

namespace {

const ClassFunction& lower_clipped() {
  static const ClassFunction f = ClassFunction::builtin_lower().clipped();
  return f;
}

std::vector<PathEvent> random_path(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PathEvent> p;
  for (int i = 0; i < n; ++i) {
    const double c = ex(rng);
    p.push_back({c, c * u(rng)});
  }
  return p;
}

// Plain scans used as oracles.
std::optional<std::int64_t> scan_tau(const std::vector<PathEvent>& p, double thr) {
  if (thr <= 0.0) return 0;
  double a2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    a2 += p[i].x * p[i].x;
    if (a2 >= thr) return static_cast<std::int64_t>(i + 1);
  }
  return std::nullopt;
}

std::optional<std::int64_t> scan_nu(const std::vector<PathEvent>& p, std::int64_t from,
                                    const ClassFunction& psi) {
  double s = 0.0, a2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p[i].x;
    a2 += p[i].x * p[i].x;
    const auto n = static_cast<std::int64_t>(i + 1);
    if (n >= from && a2 > 0.0 && s > std::sqrt(a2) * psi(a2)) return n;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("schedule values") {
  CycleSchedule five(5.0);
  CHECK(five.n(2) == 1024.0);
  CHECK(five.n(1) == 1.0);
  CHECK(five.log_n(10) == doctest::Approx(50.0 * std::log(10.0)));
  CHECK(std::isinf(five.n(200)));
  CHECK(std::isfinite(five.log_n(200)));
  CycleSchedule two(2.0);
  CHECK(two.n(3) == 729.0);
  CHECK(two.last_reached(728.0) == 2);
  CHECK(two.last_reached(729.0) == 3);
  CHECK(CycleSchedule::accounts_in_cycle(1) == 1);
  CHECK(CycleSchedule::accounts_in_cycle(2) == 1);
  CHECK(CycleSchedule::accounts_in_cycle(3) == 2);
  CHECK(CycleSchedule::accounts_in_cycle(21) == 4);
  auto list = CycleSchedule::from_list({4.0, 9.0});
  CHECK(list.n(2) == 9.0);
  CHECK(std::isinf(list.n(3)));
  CHECK_THROWS(CycleSchedule::from_list({4.0, 3.0}));
}

TEST_CASE("unit path first passage") {
  std::vector<PathEvent> unit(2000, PathEvent{1.0, 1.0});
  CHECK(compute_tau(unit, CycleSchedule(5.0).n(2)) == 1024);
  CHECK(compute_tau(unit, 0.0) == 0);
  CHECK_FALSE(compute_tau(unit, 2001.0).has_value());
}

TEST_CASE("stopping times against linear scans") {
  const auto& psi = lower_clipped();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = random_path(seed, 600);
    for (double thr : {1.0, 50.0, 150.0, 1e9}) CHECK(compute_tau(p, thr) == scan_tau(p, thr));
    const double g = 0.001 * static_cast<double>(1 + seed % 10);
    std::optional<std::int64_t> f;
    for (std::size_t i = 0; i < p.size() && !f; ++i) {
      if (g * p[i].c > 0.01) f = static_cast<std::int64_t>(i + 1);
    }
    CHECK(freeze_time(p, g) == f);
    CHECK(nu_success(p, 5, psi) == scan_nu(p, 5, psi));
  }
}

TEST_CASE("cycle freeze thresholds come after the cycle start") {
  CycleSchedule s(2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = random_path(seed, 3000);
    for (std::int64_t k = 2; k <= 3; ++k) {
      const auto tk = compute_tau(p, s.n(k));
      for (int w = 1; w <= CycleSchedule::accounts_in_cycle(k); ++w) {
        CHECK(s.log_freeze_threshold(k, w) >= s.log_n(k));
        const auto tkw = compute_tau(p, std::exp(s.log_freeze_threshold(k, w)));
        if (tkw) {
          REQUIRE(tk);
          CHECK(*tk <= *tkw);
        }
      }
    }
  }
}

TEST_CASE("sigma abort") {
  const auto& psi = lower_clipped();
  std::vector<PathEvent> p;
  for (int i = 0; i < 50; ++i) p.push_back({1.0, (i % 2) ? 1.0 : -1.0});
  SUBCASE("zero bounds after the start never trigger") {
    auto q = p;
    for (int i = 0; i < 100; ++i) q.push_back({0.0, 0.0});
    CHECK_FALSE(sigma_abort(q, 51, 1.0, psi).has_value());
  }
  SUBCASE("a single spike is found at its round") {
    auto q = p;
    for (int i = 0; i < 30; ++i) q.push_back({0.01, 0.0});
    q.push_back({100.0, 0.0});
    for (int i = 0; i < 10; ++i) q.push_back({0.01, 0.0});
    CHECK(sigma_abort(q, 50, 1.0, psi) == 81);
  }
  SUBCASE("margin paths do not trigger past warmup") {
    auto src = make_source("omega-C-margin:C=1,seed=3");
    auto q = generate_path(*src, 3000);
    const auto t = compute_tau(q, 100.0);
    REQUIRE(t);
    CHECK_FALSE(sigma_abort(q, *t, 1.0, psi).has_value());
  }
}

TEST_CASE("nu success") {
  const auto& psi = lower_clipped();
  std::vector<PathEvent> down(500, PathEvent{1.0, -1.0});
  CHECK_FALSE(nu_success(down, 0, psi).has_value());
  std::vector<PathEvent> up(500, PathEvent{1.0, 1.0});
  CHECK(nu_success(up, 10, psi) == scan_nu(up, 10, psi));
  std::vector<PathEvent> one{{1.0, 1.0}};
  CHECK_FALSE(nu_success(one, 0, ClassFunction::constant(1.0)).has_value());
}

TEST_CASE("cycle mixture structure") {
  CycleSchedule s(2.0);
  const auto params = BoundParams::make(1.0);
  CycleMixture c2(2, s, lower_clipped(), params);
  CHECK(c2.W() == 1);
  CHECK(c2.y_value() == params.alpha);
  CHECK(c2.d_value() == doctest::Approx(params.alpha).epsilon(1e-15));
  CycleMixture c5(5, s, lower_clipped(), params);
  CHECK(c5.W() == 2);
  CHECK(c5.gamma() == doctest::Approx(lower_clipped()(s.n(6)) * 25.0 / std::sqrt(s.n(6))).epsilon(1e-12));
  CHECK(c5.account(2).gamma() == doctest::Approx(c5.gamma() * std::exp(-2.0)).epsilon(1e-15));
}

TEST_CASE("D averages independent buy/sell accounts") {
  CycleSchedule s(2.0);
  const auto params = BoundParams::make(1.0).with_log_D(0.0);
  CycleMixture cm(5, s, lower_clipped(), params);
  std::vector<BuySellAccount> ref;
  for (int w = 1; w <= cm.W(); ++w) ref.emplace_back(cm.gamma() * std::exp(-static_cast<double>(w)));
  auto p = random_path(4, 500);
  for (auto& e : p) {
    e.c = std::min(e.c, 0.5);
    e.x = std::clamp(e.x, -e.c, e.c);
  }
  double A2 = 0.0;
  std::int64_t n = 0;
  for (const auto& e : p) {
    ++n;
    const double before = cm.y_value();
    const double m = cm.y_bet(e.c, n);
    for (auto& t : ref) t.bet(e.c, n);
    A2 += e.x * e.x;
    cm.update(e, A2, n);
    for (auto& t : ref) t.update(e.x);
    double d = 0.0;
    for (const auto& t : ref) d += t.value();
    d /= static_cast<double>(ref.size());
    CHECK(cm.d_value() == doctest::Approx(d).epsilon(1e-13));
    CHECK(cm.y_value() == doctest::Approx(before + m * e.x).epsilon(1e-12));
  }
}

TEST_CASE("frozen cycle mixture is constant") {
  CycleSchedule s(2.0);
  CycleMixture cm(2, s, lower_clipped(), BoundParams::make(1.0).with_log_D(0.0));
  cm.d_bet(1e6, 1);
  cm.update({1e6, 1e6}, 1e12, 1);
  const double d = cm.d_value();
  for (int i = 2; i < 20; ++i) {
    CHECK(cm.d_bet(1.0, i) == 0.0);
    cm.update({1.0, 1.0}, 1e12 + i, i);
    CHECK(cm.d_value() == d);
  }
}

TEST_CASE("claimed growth against the formula") {
  CycleSchedule s(2.0);
  const auto params = BoundParams::make(1.0).with_log_D(std::log(50.0));
  for (std::int64_t k = 1; k <= 8; ++k) {
    const double ps = lower_clipped()(s.n(k + 1));
    const double W = std::max(1.0, std::ceil(std::log(static_cast<double>(k))));
    const double expect = 1.0 + 0.99 / 50.0 * W * ps * std::exp(-ps * ps / 2);
    CHECK(claimed_growth(k, s, lower_clipped(), params).factor == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("dynamic strategy on a bounded path never starts") {
  DynamicStrategy d(lower_clipped(), CycleSchedule(2.0));
  auto src = make_source("omega-0:r=0.5,c0=1");
  auto t = run_game(d, *src, 200);
  CHECK(d.phase() == DynamicStrategy::Phase::BeforeFirst);
  CHECK(t.summary.final_state.capital() == doctest::Approx(d.params().alpha));
}

TEST_CASE("dynamic strategy survives repeated crossings") {
  const auto& psi = lower_clipped();
  DynamicStrategy d(psi, CycleSchedule(2.0));
  auto src = make_source("omega-infty-spike:C=1,period=400,drift=8,step=0.1,seed=2");
  auto path = generate_path(*src, 30000);
  VectorPathSource replay(path);
  auto t = run_game(d, replay, 30000);
  CHECK(t.summary.zero_capital_rounds == 0);
  CHECK(std::isfinite(t.summary.min_log_capital));
  CHECK(t.summary.max_accounting_residual < 1e-9);
  int nu = 0, sigma = 0;
  for (const auto& r : d.ledger()) {
    nu += r.outcome == CycleOutcome::SucceededNu ? 1 : 0;
    sigma += r.outcome == CycleOutcome::AbortedSigma ? 1 : 0;
  }
  CHECK(nu >= 1);
  CHECK(sigma >= 2);
  // The path itself crosses the boundary from below many times.
  PathStats st;
  bool above = false;
  int upcrossings = 0;
  for (const auto& e : path) {
    st.push(e);
    const bool now = st.S > st.A() * psi(st.A2);
    upcrossings += now && !above ? 1 : 0;
    above = now;
  }
  CHECK(upcrossings >= 3);
}

TEST_CASE("cycle ledger and bounds on a small-C margin path") {
  DynamicConfig cfg;
  cfg.C = 0.05;
  cfg.check_bounds = true;
  DynamicStrategy d(lower_clipped(), CycleSchedule(2.0), cfg);
  auto src = make_source("omega-C-margin:C=0.05,seed=1");
  RunOptions opts;
  opts.record_ledger = false;
  run_game(d, *src, 250000, opts);
  CHECK(d.bound_report().violations() == 0);
  const auto sum = d.bound_report().summarize();
  CHECK(sum.count("remainder_const") == 1);
  for (const auto& r : d.ledger()) {
    CHECK(r.y_start == d.params().alpha);
    const auto c = claimed_growth(r.k, CycleSchedule(2.0), lower_clipped(), d.params());
    CHECK(r.claim.log_excess == c.log_excess);
  }
}

TEST_CASE("outer mixture is linear in its components") {
  DynamicConfig base;
  base.log_D = 0.0;
  auto mix = outer_c_mixture(lower_clipped(), CycleSchedule(2.0), 4, base);
  auto src = make_source("omega-C-margin:C=2,seed=5");
  auto t = run_game(*mix, *src, 600);
  double v = mix->cash();
  for (std::size_t i = 0; i < mix->size(); ++i) v += mix->weight(i) * std::exp(mix->part(i).log_capital());
  CHECK(t.summary.final_state.capital() == doctest::Approx(v).epsilon(1e-12));
  CHECK(mix->initial_capital() == doctest::Approx(BoundParams{}.alpha).epsilon(1e-15));

  auto single = outer_c_mixture(lower_clipped(), CycleSchedule(2.0), 1, base);
  DynamicStrategy alone(lower_clipped(), CycleSchedule(2.0), base);
  auto s1 = make_source("omega-C-margin:C=1,seed=6");
  auto s2 = make_source("omega-C-margin:C=1,seed=6");
  auto t1 = run_game(*single, *s1, 600);
  auto t2 = run_game(alone, *s2, 600);
  CHECK(t1.summary.final_state.capital() ==
        doctest::Approx(0.5 * t2.summary.final_state.capital() + 0.5 * BoundParams{}.alpha).epsilon(1e-12));
}

TEST_CASE("time-scale sandwich") {
  SUBCASE("constant boundary in closed form") {
    const auto one = ClassFunction::constant(1.0);
    auto r = timescale_equivalence_check(one, 10, 100, 5.0);
    CHECK(r.violations() == 0);
    const double J = std::exp(-0.5) * ((100 * std::log(100.0) - 100) - (10 * std::log(10.0) - 10));
    for (const auto& rec : r.records()) {
      if (rec.bound_id == "timescale_lower") CHECK(rec.rhs == doctest::Approx(J).epsilon(1e-10));
    }
  }
  SUBCASE("built-in boundaries") {
    CHECK(timescale_equivalence_check(ClassFunction::builtin_lower(), 10, 100).violations() == 0);
    CHECK(timescale_equivalence_check(ClassFunction::builtin_upper(), 10, 100).violations() == 0);
  }
}
