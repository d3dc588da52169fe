#include "efkp/reality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "efkp/numeric.hpp"

namespace efkp {

GeneratorSpec GeneratorSpec::parse(const std::string& text) {
  GeneratorSpec s;
  const auto colon = text.find(':');
  s.kind = text.substr(0, colon);
  if (s.kind.empty()) throw std::invalid_argument("generator spec: missing kind in '" + text + "'");
  if (colon == std::string::npos) return s;
  std::string rest = text.substr(colon + 1);
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("generator spec: expected key=value, got '" + item + "'");
    }
    s.params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return s;
}

std::string GeneratorSpec::str() const {
  std::string out = kind;
  char sep = ':';
  for (const auto& [k, v] : params) {
    out += sep;
    out += k + "=" + v;
    sep = ',';
  }
  return out;
}

double GeneratorSpec::get(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::size_t used = 0;
  const double v = std::stod(it->second, &used);
  if (used != it->second.size()) throw std::invalid_argument("generator spec: bad number for " + key);
  return v;
}

std::uint64_t GeneratorSpec::get_seed(std::uint64_t fallback) const {
  const auto it = params.find("seed");
  return it == params.end() ? fallback : std::stoull(it->second);
}

std::string GeneratorSpec::get_str(const std::string& key, const std::string& fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

double sign(std::mt19937_64& rng) { return (rng() >> 63) ? 1.0 : -1.0; }

double psi_of(const ClassFunction& psi, double A2) { return psi.at_log(std::log(A2)); }

ClassFunction psi_from(const GeneratorSpec& s) {
  return ClassFunction::by_name(s.get_str("psi", "lower")).clipped();
}

class BernoulliSource : public PathSource {
 public:
  BernoulliSource(const GeneratorSpec& s, std::uint64_t rep)
      : spec_(s), c_(s.get("c", 1.0)), rng_(make_rng(s.get_seed(), rep)) {}
  PathEvent next(const PathStats&) override { return {c_, sign(rng_) * c_}; }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  double c_;
  std::mt19937_64 rng_;
};

class UniformSource : public PathSource {
 public:
  UniformSource(const GeneratorSpec& s, std::uint64_t rep)
      : spec_(s), c_(s.get("c", 1.0)), cmin_(s.get("cmin", c_)), rng_(make_rng(s.get_seed(), rep)) {}
  PathEvent next(const PathStats&) override {
    const double c = cmin_ == c_ ? c_ : cmin_ + (c_ - cmin_) * uniform01(rng_);
    const double x = std::clamp((2.0 * uniform01(rng_) - 1.0) * c, -c, c);
    return {c, x};
  }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  double c_, cmin_;
  std::mt19937_64 rng_;
};

class MarginSource : public PathSource {
 public:
  MarginSource(const GeneratorSpec& s, std::uint64_t rep)
      : spec_(s),
        psi_(psi_from(s)),
        C_(s.get("C", 1.0)),
        margin_(s.get("margin", 0.9)),
        delta_(s.get("delta", 0.01)),
        warmup_(s.get("warmup", 16.0)),
        rng_(make_rng(s.get_seed(), rep)) {}
  PathEvent next(const PathStats& before) override {
    if (before.A2 < warmup_) return {1.0, sign(rng_)};
    const double p = psi_of(psi_, before.A2);
    const double c = margin_ * (1.0 - delta_) * C_ * before.A() / (p * p * p);
    return {c, sign(rng_) * c};
  }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  ClassFunction psi_;
  double C_, margin_, delta_, warmup_;
  std::mt19937_64 rng_;
};

class OmegaZeroSource : public PathSource {
 public:
  OmegaZeroSource(const GeneratorSpec& s, std::uint64_t rep)
      : spec_(s), r_(s.get("r", 0.5)), c_(s.get("c0", 1.0)), rng_(make_rng(s.get_seed(), rep)) {
    if (!(r_ > 0.0 && r_ < 1.0)) throw std::invalid_argument("omega-0: r must lie in (0,1)");
  }
  PathEvent next(const PathStats&) override {
    c_ *= r_;
    return {c_, sign(rng_) * c_};
  }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  double r_, c_;
  std::mt19937_64 rng_;
};

class SpikeSource : public PathSource {
 public:
  SpikeSource(const GeneratorSpec& s, std::uint64_t rep)
      : spec_(s),
        psi_(psi_from(s)),
        C_(s.get("C", 1.0)),
        margin_(s.get("margin", 0.9)),
        delta_(s.get("delta", 0.01)),
        warmup_(s.get("warmup", 16.0)),
        period_(static_cast<std::int64_t>(s.get("period", 400))),
        drift_(static_cast<std::int64_t>(s.get("drift", 100))),
        step_(s.get("step", 1.0)),
        rng_(make_rng(s.get_seed(), rep)) {
    if (period_ < 1 || drift_ < 0 || drift_ >= period_) {
      throw std::invalid_argument("omega-infty-spike: need 0 <= drift < period");
    }
  }
  PathEvent next(const PathStats& before) override {
    if (before.A2 < warmup_) return {1.0, sign(rng_)};
    const std::int64_t t = phase_++;
    const double p = psi_of(psi_, before.A2);
    const double base = C_ * before.A() / (p * p * p);
    const std::int64_t pos = t % period_;
    if (pos == period_ - 1 - drift_) {
      ++spikes_;
      const double c = (1.0 + step_ * static_cast<double>(spikes_)) * base;
      return {c, c};
    }
    const double c = margin_ * (1.0 - delta_) * base;
    if (pos > period_ - 1 - drift_) return {c, c};
    return {c, sign(rng_) * c};
  }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  ClassFunction psi_;
  double C_, margin_, delta_, warmup_;
  std::int64_t period_, drift_;
  double step_;
  std::int64_t phase_ = 0;
  std::int64_t spikes_ = 0;
  std::mt19937_64 rng_;
};

class AdversarialSource : public PathSource {
 public:
  explicit AdversarialSource(const GeneratorSpec& s)
      : spec_(s),
        psi_(psi_from(s)),
        C_(s.get("C", 1.0)),
        cap_(s.get("cap", 0.02)),
        warmup_(s.get("warmup", 16.0)),
        warmup_c_(s.get("warmup_c", cap_)) {}
  PathEvent next(const PathStats& before) override {
    if (before.A2 < warmup_) return {warmup_c_, warmup_c_};
    const double p = psi_of(psi_, before.A2);
    const double c = std::min(cap_, C_ * before.A() / (p * p * p));
    return {c, c};
  }
  std::string describe() const override { return spec_.str(); }

 private:
  GeneratorSpec spec_;
  ClassFunction psi_;
  double C_, cap_, warmup_, warmup_c_;
};

class NamedVectorSource : public VectorPathSource {
 public:
  NamedVectorSource(std::vector<PathEvent> ev, std::string name)
      : VectorPathSource(std::move(ev)), name_(std::move(name)) {}
  std::string describe() const override { return name_; }

 private:
  std::string name_;
};

}  // namespace

std::unique_ptr<PathSource> make_source(const GeneratorSpec& s, std::uint64_t rep) {
  if (s.kind == "bernoulli-symmetric") return std::make_unique<BernoulliSource>(s, rep);
  if (s.kind == "uniform-bounded") return std::make_unique<UniformSource>(s, rep);
  if (s.kind == "omega-C-margin") return std::make_unique<MarginSource>(s, rep);
  if (s.kind == "omega-0") return std::make_unique<OmegaZeroSource>(s, rep);
  if (s.kind == "omega-infty-spike") return std::make_unique<SpikeSource>(s, rep);
  if (s.kind == "adversarial-upper-crossing") return std::make_unique<AdversarialSource>(s);
  if (s.kind == "boundary-stress") {
    auto ev = boundary_path(s.get("gamma", 0.001), s.get("kappa", 1.0), s.get("c", 1.0),
                            static_cast<std::int64_t>(s.get("lead", 200)),
                            static_cast<std::int64_t>(s.get("length", 400)),
                            s.get_seed() * 0x9E3779B97F4A7C15ULL + rep);
    return std::make_unique<NamedVectorSource>(std::move(ev), s.str());
  }
  if (s.kind == "replay-file") {
    const std::string path = s.get_str("path", "");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("replay-file: cannot open '" + path + "'");
    return std::make_unique<NamedVectorSource>(read_path_jsonl(in), s.str());
  }
  throw std::invalid_argument("unknown generator kind '" + s.kind + "'");
}

std::unique_ptr<PathSource> make_source(const std::string& spec, std::uint64_t rep) {
  return make_source(GeneratorSpec::parse(spec), rep);
}

std::vector<PathEvent> generate_path(PathSource& source, std::int64_t n) {
  std::vector<PathEvent> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  PathStats st;
  for (std::int64_t i = 0; i < n; ++i) {
    const PathEvent e = source.next(st);
    validate_event(e);
    st.push(e);
    out.push_back(e);
  }
  return out;
}

std::vector<PathEvent> boundary_path(double gamma, double kappa, double c, std::int64_t lead,
                                     std::int64_t length, std::uint64_t seed) {
  if (!(gamma > 0.0 && kappa > 0.0 && c > 0.0) || lead < 0 || length < lead + 2) {
    throw std::invalid_argument("boundary_path: need positive gamma, kappa, c and length >= lead + 2");
  }
  const double kg = kappa * gamma;
  auto rng = make_rng(seed, 0);
  std::vector<PathEvent> out;
  PathStats st;
  auto emit = [&](double x) {
    const PathEvent e{c, x};
    validate_event(e);
    st.push(e);
    out.push_back(e);
  };
  for (std::int64_t i = 0; i < lead; ++i) emit(sign(rng) * c);
  // Steer the gap S - kappa gamma A^2 towards zero.
  for (std::int64_t i = lead; i < length - 2; ++i) {
    const double gap = st.S - kg * st.A2;
    emit(gap < 0.0 ? c : -c);
  }
  {
    const double gap = st.S - kg * st.A2;
    emit(std::clamp(-0.5 * gap, -c, c));
  }
  // Final step solves gap + x - kappa gamma x^2 = 0 for the root near -gap.
  const double gap = st.S - kg * st.A2;
  const double disc = 1.0 + 4.0 * kg * gap;
  if (!(disc >= 0.0)) throw std::logic_error("boundary_path: steering left no real root");
  const double x = -2.0 * gap / (1.0 + std::sqrt(disc));
  if (!(std::abs(x) <= c)) throw std::logic_error("boundary_path: final step exceeds c");
  emit(x);
  return out;
}

ClassCheck classify(const std::vector<PathEvent>& path, const GeneratorSpec& s) {
  ClassCheck out;
  PathStats st;
  for (const auto& e : path) validate_event(e);
  if (s.kind == "omega-C-margin") {
    const auto psi = psi_from(s);
    const double C = s.get("C", 1.0), delta = s.get("delta", 0.01), warm = s.get("warmup", 16.0);
    double worst = 0.0;
    for (const auto& e : path) {
      const bool post = st.A2 >= warm;
      st.push(e);
      if (!post) continue;
      const double p = psi_of(psi, st.A2);
      worst = std::max(worst, e.c * p * p * p / st.A());
    }
    out.statistic = worst;
    out.member = worst <= (1.0 - delta) * C;
    out.detail = "max c psi(A^2)^3 / A = " + fmt17(worst) + " vs (1-delta)C = " + fmt17((1.0 - delta) * C);
    return out;
  }
  if (s.kind == "adversarial-upper-crossing") {
    const auto psi = psi_from(s);
    const double C = s.get("C", 1.0), warm = s.get("warmup", 16.0);
    double worst = 0.0;
    bool all_up = true;
    for (const auto& e : path) {
      all_up = all_up && e.x == e.c;
      if (st.A2 >= warm) {
        const double p = psi_of(psi, st.A2);
        worst = std::max(worst, e.c * p * p * p / st.A());
      }
      st.push(e);
    }
    out.statistic = worst;
    out.member = all_up && worst <= C * (1.0 + 1e-12);
    out.detail = "max c psi(A^2_{n-1})^3 / A_{n-1} = " + fmt17(worst) + (all_up ? "" : "; some x != c");
    return out;
  }
  if (s.kind == "omega-0") {
    const double r = s.get("r", 0.5), c0 = s.get("c0", 1.0);
    const double cap = c0 * c0 * r * r / (1.0 - r * r);
    for (const auto& e : path) st.push(e);
    out.statistic = st.A2;
    out.member = st.A2 <= cap * (1.0 + 1e-12);
    out.detail = "A^2 = " + fmt17(st.A2) + " vs limit " + fmt17(cap);
    return out;
  }
  if (s.kind == "omega-infty-spike") {
    const auto psi = psi_from(s);
    const double warm = s.get("warmup", 16.0);
    double record = 0.0;
    std::int64_t spikes = 0, records = 0;
    const double C = s.get("C", 1.0);
    for (const auto& e : path) {
      if (st.A2 >= warm) {
        const double p = psi_of(psi, st.A2);
        const double ratio = e.c * p * p * p / st.A();
        if (ratio > C * (1.0 + 1e-9)) {
          ++spikes;
          if (ratio > record) ++records;
        }
        record = std::max(record, ratio);
      }
      st.push(e);
    }
    out.statistic = record;
    out.member = spikes > 0 && spikes == records;
    out.detail = std::to_string(spikes) + " spikes, " + std::to_string(records) + " new records";
    return out;
  }
  out.member = true;
  out.detail = "protocol-legal";
  return out;
}

}  // namespace efkp
