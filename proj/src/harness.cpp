#include "efkp/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "efkp/accounts.hpp"
#include "efkp/class_functions.hpp"
#include "efkp/numeric.hpp"
#include "efkp/reality.hpp"
#include "efkp/sharpness.hpp"
#include "efkp/validity.hpp"

namespace efkp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  return d;
}

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);
}

nlohmann::ordered_json bounds_json(const std::map<std::string, BoundStats>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, s] : m) {
    j[id] = {{"evaluated", s.evaluated}, {"violations", s.violations}, {"worst_slack", num(s.worst_slack)}};
  }
  return j;
}

ClassFunction config_psi(const ExperimentConfig& c) { return ClassFunction::by_name(c.psi).clipped(); }

DynamicConfig dynamic_config(const ExperimentConfig& c) {
  DynamicConfig d;
  d.C = c.C;
  d.delta = c.delta;
  d.log_D = c.log_D;
  d.nodes = c.nodes;
  d.literal_reentry = c.literal_reentry;
  d.check_bounds = c.bound_checks;
  d.keep_bound_records = c.ledger;
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "strategy") strategy = v;
  else if (key == "path") path = v;
  else if (key == "horizon") horizon = parse_int(key, v);
  else if (key == "replications") replications = parse_int(key, v);
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "psi") psi = v;
  else if (key == "beta") beta = parse_double(key, v);
  else if (key == "C") C = parse_double(key, v);
  else if (key == "C_max") C_max = static_cast<int>(parse_int(key, v));
  else if (key == "k_max") k_max = parse_int(key, v);
  else if (key == "delta") delta = parse_double(key, v);
  else if (key == "nodes") nodes = static_cast<int>(parse_int(key, v));
  else if (key == "log_D") log_D = v.empty() ? std::nullopt : std::optional(parse_double(key, v));
  else if (key == "literal_reentry") literal_reentry = parse_bool(key, v);
  else if (key == "ledger") ledger = parse_bool(key, v);
  else if (key == "bound_checks") bound_checks = parse_bool(key, v);
  else if (key == "strict") strict = parse_bool(key, v);
  else if (key == "threads") threads = static_cast<int>(parse_int(key, v));
  else if (key == "out_dir") out_dir = v;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path + "'");
  return parse(in);
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "strategy = " << strategy << '\n'
    << "path = " << path << '\n'
    << "horizon = " << horizon << '\n'
    << "replications = " << replications << '\n'
    << "seed = " << seed << '\n'
    << "psi = " << psi << '\n'
    << "beta = " << fmt17(beta) << '\n'
    << "C = " << fmt17(C) << '\n'
    << "C_max = " << C_max << '\n'
    << "k_max = " << k_max << '\n'
    << "delta = " << fmt17(delta) << '\n'
    << "nodes = " << nodes << '\n';
  if (log_D) o << "log_D = " << fmt17(*log_D) << '\n';
  o << "literal_reentry = " << (literal_reentry ? "true" : "false") << '\n'
    << "ledger = " << (ledger ? "true" : "false") << '\n'
    << "bound_checks = " << (bound_checks ? "true" : "false") << '\n'
    << "strict = " << (strict ? "true" : "false") << '\n'
    << "threads = " << threads << '\n'
    << "out_dir = " << out_dir << '\n';
  return o.str();
}

std::filesystem::path ExperimentConfig::resolved_out_dir() const {
  std::filesystem::path p(out_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (root != nullptr && *root != '\0' && p.is_relative()) return std::filesystem::path(root) / p;
  return p;
}

std::unique_ptr<Skeptic> make_skeptic(const ExperimentConfig& c) {
  const auto spec = GeneratorSpec::parse(c.strategy);
  if (spec.kind == "cp") {
    return std::make_unique<ConstantProportionSkeptic>(spec.get("gamma", 0.0), c.delta,
                                                       spec.get("alpha", 1.0));
  }
  if (spec.kind == "q") {
    return std::make_unique<UniformMixtureSkeptic>(spec.get("gamma", 0.0), c.delta, c.nodes);
  }
  if (spec.kind == "validity") {
    return std::make_unique<ValidityMixture>(
        ValidityMixture::with_blocking(config_psi(c), c.k_max, 0, c.delta));
  }
  if (spec.kind == "dynamic") {
    return std::make_unique<DynamicStrategy>(config_psi(c), CycleSchedule(c.beta), dynamic_config(c));
  }
  if (spec.kind == "outer") {
    return outer_c_mixture(config_psi(c), CycleSchedule(c.beta), c.C_max, dynamic_config(c));
  }
  throw std::invalid_argument("unknown strategy '" + c.strategy + "'");
}

// ---------------------------------------------------------------------------

namespace {

void collect_dynamic(Skeptic& s, BoundReport& report, std::vector<const DynamicStrategy*>& out) {
  if (auto* d = dynamic_cast<DynamicStrategy*>(&s)) {
    report.append(d->bound_report());
    out.push_back(d);
  } else if (auto* m = dynamic_cast<MixtureSkeptic*>(&s)) {
    for (std::size_t i = 0; i < m->size(); ++i) collect_dynamic(m->part(i), report, out);
  }
}

ReplicationResult run_one(const ExperimentConfig& c, std::int64_t rep, bool write_files) {
  ReplicationResult r;
  r.index = rep;
  auto gspec = GeneratorSpec::parse(c.path);
  if (!gspec.params.count("seed")) gspec.params["seed"] = std::to_string(c.seed);
  auto source = make_source(gspec, static_cast<std::uint64_t>(rep));
  auto skeptic = make_skeptic(c);

  BoundReport report;
  report.set_keep_records(c.ledger && write_files);
  const BoundParams params = BoundParams::make(c.C, c.delta);

  RunOptions opts;
  opts.record_ledger = c.ledger && write_files;
  if (c.bound_checks) {
    if (auto* cp = dynamic_cast<ConstantProportionSkeptic*>(skeptic.get())) {
      opts.on_round = [cp, &report](const GameState& st, const PathEvent&) {
        if (!cp->account().frozen()) report.append(cp_bound_check(cp->account(), st));
      };
    } else if (auto* q = dynamic_cast<UniformMixtureSkeptic*>(skeptic.get())) {
      opts.on_round = [q, &report](const GameState& st, const PathEvent&) {
        if (!q->account().frozen()) report.append(q_upper_bounds(q->account(), st));
      };
    } else if (auto* vm = dynamic_cast<ValidityMixture*>(skeptic.get())) {
      opts.on_round = [vm, &report, &r, params](const GameState& st, const PathEvent&) {
        auto cert = validity_certificate(*vm, st, params);
        if (!cert.applicable) return;
        ++r.certificate_rounds;
        if (cert.report.violations() == 0) ++r.certificate_passes;
        report.append(cert.report);
      };
    }
  }

  Trajectory traj;
  try {
    traj = run_game(*skeptic, *source, c.horizon, opts);
  } catch (const ProtocolError& e) {
    r.error = std::string("protocol: ") + e.what();
  } catch (const StrategyError& e) {
    r.error = std::string("strategy: ") + e.what();
  } catch (const std::out_of_range& e) {
    r.error = std::string("path: ") + e.what();
  }
  r.summary = traj.summary;

  std::vector<const DynamicStrategy*> dyn;
  collect_dynamic(*skeptic, report, dyn);
  for (const auto* d : dyn) r.cycles += static_cast<std::int64_t>(d->ledger().size());

  r.bounds = report.summarize();
  r.violations = report.violations();

  if (write_files) {
    char name[32];
    std::snprintf(name, sizeof name, "rep_%05lld", static_cast<long long>(rep));
    const auto dir = c.resolved_out_dir() / name;
    std::filesystem::create_directories(dir);
    if (opts.record_ledger) {
      std::ofstream t(dir / "trajectory.csv");
      write_trajectory_csv(t, traj);
    }
    if (!report.records().empty()) {
      std::ofstream b(dir / "bounds.csv");
      write_bound_csv(b, report);
    }
    for (std::size_t i = 0; i < dyn.size(); ++i) {
      std::ofstream cy(dir / (dyn.size() == 1 ? std::string("cycles.csv")
                                              : "cycles_" + std::to_string(i + 1) + ".csv"));
      write_cycle_ledger_csv(cy, dyn[i]->ledger());
    }
    auto j = nlohmann::ordered_json::parse(summary_json(traj, skeptic->name(), source->describe()));
    j["bounds"] = bounds_json(r.bounds);
    j["violations"] = r.violations;
    j["certificate_rounds"] = r.certificate_rounds;
    j["certificate_passes"] = r.certificate_passes;
    j["cycles"] = r.cycles;
    j["error"] = r.error;
    std::ofstream s(dir / "summary.json");
    s << j.dump(2) << '\n';
    if (!s) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  }
  return r;
}

}  // namespace

int ResultBundle::exit_code() const {
  if (!strict) return 0;
  return (total_violations > 0 || errors > 0) ? 1 : 0;
}

std::string ResultBundle::summary_json() const {
  nlohmann::ordered_json j;
  j["replications"] = static_cast<std::int64_t>(replications.size());
  j["mean_final_capital"] = num(mean_final_capital);
  j["std_error"] = num(std_error);
  j["total_violations"] = total_violations;
  j["errors"] = errors;
  std::int64_t cert_rounds = 0, cert_pass = 0;
  for (const auto& r : replications) {
    cert_rounds += r.certificate_rounds;
    cert_pass += r.certificate_passes;
  }
  j["certificate_rounds"] = cert_rounds;
  j["certificate_pass_rate"] = cert_rounds > 0 ? num(static_cast<double>(cert_pass) / cert_rounds) : nlohmann::json();
  j["bounds"] = bounds_json(bounds);
  auto list = nlohmann::ordered_json::array();
  const std::size_t shown = std::min<std::size_t>(replications.size(), 10000);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& r = replications[i];
    list.push_back({{"index", r.index},
                    {"final_log_capital", num(r.summary.final_state.log_capital)},
                    {"rounds", r.summary.final_state.n},
                    {"violations", r.violations},
                    {"cycles", r.cycles},
                    {"error", r.error}});
  }
  j["replications_listed"] = static_cast<std::int64_t>(shown);
  j["per_replication"] = list;
  return j.dump(2);
}

ResultBundle run_experiment(const ExperimentConfig& c, bool write_files) {
  if (c.replications < 0 || c.horizon < 0) throw std::invalid_argument("negative horizon or replications");
  ResultBundle b;
  b.strict = c.strict;
  b.replications.resize(static_cast<std::size_t>(c.replications));
  if (write_files) {
    std::filesystem::create_directories(c.resolved_out_dir());
    std::ofstream cfg(c.resolved_out_dir() / "config.txt");
    cfg << c.to_text();
  }

  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= c.replications) return;
      try {
        b.replications[static_cast<std::size_t>(i)] = run_one(c, i, write_files);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = c.replications;
      }
    }
  };
  const int nt = std::max(1, std::min<int>(c.threads, static_cast<int>(std::max<std::int64_t>(c.replications, 1))));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Sequential reduction in replication order.
  double sum = 0.0, sum2 = 0.0;
  for (const auto& r : b.replications) {
    const double k = std::exp(r.summary.final_state.log_capital);
    sum += k;
    sum2 += k * k;
    b.total_violations += r.violations;
    if (!r.error.empty()) ++b.errors;
    for (const auto& [id, s] : r.bounds) {
      auto& t = b.bounds[id];
      if (t.evaluated == 0 || s.worst_slack < t.worst_slack) t.worst_slack = s.worst_slack;
      t.evaluated += s.evaluated;
      t.violations += s.violations;
    }
  }
  const double R = static_cast<double>(b.replications.size());
  if (R > 0) {
    b.mean_final_capital = sum / R;
    const double var = R > 1 ? std::max(0.0, (sum2 - R * b.mean_final_capital * b.mean_final_capital) / (R - 1)) : 0.0;
    b.std_error = std::sqrt(var / R);
  }
  if (write_files) {
    std::ofstream s(c.resolved_out_dir() / "summary.json");
    s << b.summary_json() << '\n';
    if (!s) throw std::runtime_error("cannot write summary.json");
  }
  return b;
}

// ---------------------------------------------------------------------------

BoundReport verify_all_bounds(const std::vector<PathEvent>& path, const VerifyOptions& o) {
  std::vector<Account> cps;
  std::vector<UniformMixtureAccount> qs;
  std::vector<BuySellAccount> ts;
  for (double g : o.gammas) {
    cps.emplace_back(g, o.delta);
    qs.emplace_back(g, o.delta, o.nodes);
    ts.emplace_back(g, o.delta, o.nodes);
  }
  std::unique_ptr<ValidityMixture> vm;
  if (o.validity) {
    vm = std::make_unique<ValidityMixture>(ValidityMixture::with_blocking(
        ClassFunction::by_name(o.psi).clipped(), o.k_max, 0, o.delta));
  }
  const BoundParams params = BoundParams::make(o.C, o.delta);

  BoundReport report;
  report.set_keep_records(o.keep_records);
  PathStats st;
  for (const auto& e : path) {
    validate_event(e);
    const std::int64_t round = st.n + 1;
    for (auto& a : cps) a.bet(e.c, round);
    for (auto& q : qs) q.bet(e.c, round);
    for (auto& t : ts) t.bet(e.c, round);
    if (vm) vm->bet_fraction(st, e.c);
    st.push(e);
    for (auto& a : cps) a.update(e.x);
    for (auto& q : qs) q.update(e.x);
    for (auto& t : ts) t.update(e.x);
    if (vm) vm->observe(st, e);

    for (const auto& a : cps) {
      if (!a.frozen()) report.append(cp_bound_check(a, st));
    }
    for (const auto& q : qs) {
      if (!q.frozen()) report.append(q_upper_bounds(q, st));
    }
    for (const auto& t : ts) {
      if (!t.frozen()) report.append(t_bounds(t, st));
    }
    if (vm) {
      auto cert = validity_certificate(*vm, st, params);
      if (cert.applicable) report.append(cert.report);
    }
  }
  return report;
}

}  // namespace efkp
