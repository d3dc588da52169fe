#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "efkp/reality.hpp"

using namespace efkp;

TEST_CASE("generator spec parsing") {
  auto s = GeneratorSpec::parse("omega-C-margin:C=2,seed=7");
  CHECK(s.kind == "omega-C-margin");
  CHECK(s.get("C", 1.0) == 2.0);
  CHECK(s.get_seed() == 7);
  CHECK(s.get("margin", 0.9) == 0.9);
  CHECK(GeneratorSpec::parse(s.str()).params == s.params);
  CHECK(GeneratorSpec::parse("bernoulli-symmetric").params.empty());
  CHECK_THROWS(make_source("no-such-kind"));
}

TEST_CASE("unit Bernoulli path") {
  auto src = make_source("bernoulli-symmetric:c=1,seed=3");
  auto p = generate_path(*src, 1000);
  PathStats st;
  int ups = 0;
  for (const auto& e : p) {
    CHECK(std::abs(e.x) == 1.0);
    ups += e.x > 0 ? 1 : 0;
    st.push(e);
  }
  CHECK(st.A2 == 1000.0);
  CHECK(ups > 400);
  CHECK(ups < 600);
}

TEST_CASE("geometric path keeps A2 bounded") {
  auto src = make_source("omega-0:r=0.5,c0=1");
  auto p = generate_path(*src, 200);
  PathStats st;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p[i].c == doctest::Approx(std::ldexp(1.0, -static_cast<int>(i + 1))));
    st.push(p[i]);
  }
  CHECK(st.A2 <= 1.0 / 3.0);
  CHECK(classify(p, GeneratorSpec::parse("omega-0:r=0.5,c0=1")).member);
}

TEST_CASE("streams are reproducible and distinct") {
  auto a = generate_path(*make_source("uniform-bounded:c=2,seed=9", 0), 100);
  auto b = generate_path(*make_source("uniform-bounded:c=2,seed=9", 0), 100);
  auto c = generate_path(*make_source("uniform-bounded:c=2,seed=9", 1), 100);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].x == b[i].x;
    differ = differ || a[i].x != c[i].x;
  }
  CHECK(same);
  CHECK(differ);
  auto rng = make_rng(1, 2);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("adversarial upper crossing") {
  const auto spec = GeneratorSpec::parse("adversarial-upper-crossing:C=1,cap=0.02");
  auto src = make_source(spec);
  auto p = generate_path(*src, 50000);
  const auto psi = ClassFunction::builtin_lower().clipped();
  PathStats st;
  double sum_c = 0.0, sum_c2 = 0.0;
  int crossings = 0;
  for (const auto& e : p) {
    CHECK(e.x == e.c);
    if (st.A2 >= 16.0) {
      const double p3 = std::pow(psi(st.A2), 3);
      CHECK(e.c == doctest::Approx(std::min(0.02, st.A() / p3)).epsilon(1e-14));
    }
    st.push(e);
    sum_c += e.c;
    sum_c2 += e.c * e.c;
    CHECK(st.S == doctest::Approx(st.A() * sum_c / std::sqrt(sum_c2)).epsilon(1e-12));
    crossings += st.S >= st.A() * psi(st.A2) ? 1 : 0;
  }
  CHECK(crossings > 0);
  CHECK(classify(p, spec).member);
}

TEST_CASE("margin and spike paths classify as intended") {
  const auto margin = GeneratorSpec::parse("omega-C-margin:C=1,seed=2");
  CHECK(classify(generate_path(*make_source(margin), 3000), margin).member);
  const auto spike = GeneratorSpec::parse("omega-infty-spike:C=1,period=100,drift=50,seed=2");
  CHECK(classify(generate_path(*make_source(spike), 3000), spike).member);
}

TEST_CASE("boundary paths land on the requested line") {
  for (double kappa : {2.0 / 2.718281828459045, 1.0, 2.718281828459045}) {
    auto p = boundary_path(0.002, kappa, 1.0, 150, 400, 11);
    PathStats st;
    for (const auto& e : p) st.push(e);
    CHECK(p.size() == 400);
    CHECK(st.S == doctest::Approx(kappa * 0.002 * st.A2).epsilon(1e-12));
  }
}

TEST_CASE("replay files") {
  const auto file = std::filesystem::temp_directory_path() / "efkp_replay_test.jsonl";
  {
    std::ofstream out(file);
    write_path_jsonl(out, {{1.0, 0.5}, {2.0, -2.0}});
  }
  auto src = make_source("replay-file:path=" + file.string());
  auto p = generate_path(*src, 2);
  CHECK(p[1].x == -2.0);
  CHECK_THROWS(generate_path(*make_source("replay-file:path=" + file.string()), 3));
  std::filesystem::remove(file);
}
