#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efkp/class_functions.hpp"
#include "efkp/harness.hpp"
#include "efkp/numeric.hpp"
#include "efkp/reality.hpp"

using namespace efkp;

namespace {

// A path argument naming an existing file is replayed; anything else is a generator spec.
std::string path_spec(const std::string& s) {
  if (s.find(':') == std::string::npos && std::filesystem::is_regular_file(s)) return "replay-file:path=" + s;
  return s;
}

struct RunFlags {
  std::string config_file;
  std::optional<std::string> psi, path, out;
  std::optional<std::int64_t> horizon, replications, kmax;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool strict = false;
  bool no_ledger = false;
  bool no_bounds = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_file, "key = value config file; flags override it");
  cmd->add_option("--psi", f.psi, "upper | lower | constant:<v> | CSV file of (lambda, psi)");
  cmd->add_option("--horizon", f.horizon, "rounds per replication");
  cmd->add_option("--path", f.path, "generator spec (e.g. omega-C-margin:C=2,seed=7) or JSON-lines file");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--replications", f.replications, "number of replications");
  cmd->add_option("--threads", f.threads, "worker threads over replications");
  cmd->add_flag("--strict", f.strict, "nonzero exit on any violation or protocol error");
  cmd->add_flag("--no-ledger", f.no_ledger, "skip per-round trajectory and bound records");
  cmd->add_flag("--no-bounds", f.no_bounds, "skip per-round bound checks");
}

ExperimentConfig base_config(const RunFlags& f) {
  ExperimentConfig c = f.config_file.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(f.config_file);
  if (f.psi) c.psi = *f.psi;
  if (f.path) c.path = path_spec(*f.path);
  if (f.out) c.out_dir = *f.out;
  if (f.horizon) c.horizon = *f.horizon;
  if (f.replications) c.replications = *f.replications;
  if (f.kmax) c.k_max = *f.kmax;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.strict) c.strict = true;
  if (f.no_ledger) c.ledger = false;
  if (f.no_bounds) c.bound_checks = false;
  return c;
}

int report(const ExperimentConfig& c, const ResultBundle& b) {
  std::cout << "out " << c.resolved_out_dir().string() << '\n'
            << "replications " << b.replications.size() << '\n'
            << "mean_final_capital " << fmt17(b.mean_final_capital) << '\n'
            << "std_error " << fmt17(b.std_error) << '\n'
            << "violations " << b.total_violations << '\n'
            << "errors " << b.errors << '\n';
  for (const auto& r : b.replications) {
    if (!r.error.empty()) std::cerr << "replication " << r.index << ": " << r.error << '\n';
  }
  return b.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Game-theoretic law of the iterated logarithm: strategies, bounds and experiments"};
  app.require_subcommand(1);

  RunFlags vflags;
  auto* validity = app.add_subcommand("validity-run", "run the validity mixture strategy");
  add_run_flags(validity, vflags);
  validity->add_option("--kmax", vflags.kmax, "largest mixture index");

  RunFlags sflags;
  std::optional<double> beta, single_C, log_D;
  std::optional<int> c_max;
  bool literal = false;
  auto* sharp = app.add_subcommand("sharpness-run", "run the dynamic sharpness strategy");
  add_run_flags(sharp, sflags);
  sharp->add_option("--beta", beta, "schedule exponent, n_k = k^(beta k)");
  sharp->add_option("--C-max", c_max, "outer mixture over C = 1..C-max");
  sharp->add_option("--C", single_C, "run a single dynamic strategy at this C instead of the mixture");
  sharp->add_option("--log-D", log_D, "override the stored log of the remainder constant");
  sharp->add_flag("--literal-reentry", literal, "re-enter on the stopping-time form rather than A^2");

  std::string vpath;
  std::int64_t vhorizon = 10000;
  std::vector<double> gammas{0.001, 0.003, 0.01};
  bool vvalidity = false, vstrict = false;
  std::string vpsi = "upper", vout;
  std::int64_t vkmax = 1000;
  double vdelta = 0.01;
  auto* verify = app.add_subcommand("verify", "evaluate every per-round bound along one path");
  verify->add_option("--path", vpath, "generator spec or JSON-lines file")->required();
  verify->add_option("--horizon", vhorizon, "rounds drawn from a generator");
  verify->add_option("--gamma", gammas, "account rates")->delimiter(',');
  verify->add_option("--delta", vdelta, "freeze margin");
  verify->add_flag("--validity", vvalidity, "also evaluate the validity certificate");
  verify->add_option("--psi", vpsi, "class function for --validity");
  verify->add_option("--kmax", vkmax, "largest mixture index for --validity");
  verify->add_option("--out", vout, "write bound records CSV here");
  verify->add_flag("--strict", vstrict, "nonzero exit on any violation");

  std::string gspec;
  std::int64_t ghorizon = 1000;
  std::uint64_t grep = 0;
  std::string gout;
  bool gclassify = false;
  auto* gen = app.add_subcommand("generate-path", "draw a path and write it as JSON lines");
  gen->add_option("spec", gspec, "generator spec")->required();
  gen->add_option("--horizon", ghorizon, "rounds");
  gen->add_option("--replication", grep, "replication stream");
  gen->add_option("--out", gout, "output file (default stdout)");
  gen->add_flag("--classify", gclassify, "print the post-hoc class check to stderr");

  std::string fpsi = "upper";
  std::vector<double> at;
  std::vector<double> integral;
  bool fclip = false;
  auto* cfn = app.add_subcommand("class-fn", "evaluate a class function and its integral criterion");
  cfn->add_option("--psi", fpsi, "upper | lower | constant:<v> | CSV file");
  cfn->add_option("--at", at, "lambda values")->delimiter(',');
  cfn->add_option("--integral", integral, "lo,hi for the integral criterion")->delimiter(',')->expected(2);
  cfn->add_flag("--clip", fclip, "clip between the built-in lower and upper functions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validity) {
      ExperimentConfig c = base_config(vflags);
      c.strategy = "validity";
      return report(c, run_experiment(c));
    }
    if (*sharp) {
      RunFlags f = sflags;
      if (!f.psi && f.config_file.empty()) f.psi = "lower";
      ExperimentConfig c = base_config(f);
      if (beta) c.beta = *beta;
      if (c_max) c.C_max = *c_max;
      if (log_D) c.log_D = *log_D;
      if (literal) c.literal_reentry = true;
      if (single_C) {
        c.C = *single_C;
        c.strategy = "dynamic";
      } else {
        c.strategy = "outer";
      }
      return report(c, run_experiment(c));
    }
    if (*verify) {
      auto src = make_source(path_spec(vpath));
      const auto path = generate_path(*src, vhorizon);
      VerifyOptions o;
      o.gammas = gammas;
      o.delta = vdelta;
      o.validity = vvalidity;
      o.psi = vpsi;
      o.k_max = vkmax;
      o.keep_records = !vout.empty();
      const auto rep = verify_all_bounds(path, o);
      std::cout << "rounds " << path.size() << '\n';
      for (const auto& [id, s] : rep.summarize()) {
        std::cout << id << " evaluated " << s.evaluated << " violations " << s.violations
                  << " worst_slack " << fmt17(s.worst_slack) << '\n';
      }
      if (!vout.empty()) {
        std::ofstream out(vout);
        write_bound_csv(out, rep);
        if (!out) throw std::runtime_error("cannot write " + vout);
      }
      return (vstrict && rep.violations() > 0) ? 1 : 0;
    }
    if (*gen) {
      const auto spec = GeneratorSpec::parse(gspec);
      auto src = make_source(spec, grep);
      const auto path = generate_path(*src, ghorizon);
      if (gout.empty()) {
        write_path_jsonl(std::cout, path);
      } else {
        std::ofstream out(gout);
        write_path_jsonl(out, path);
        if (!out) throw std::runtime_error("cannot write " + gout);
      }
      if (gclassify) {
        const auto cc = classify(path, spec);
        std::cerr << "member " << (cc.member ? "yes" : "no") << " statistic " << fmt17(cc.statistic) << ' '
                  << cc.detail << '\n';
      }
      return 0;
    }
    if (*cfn) {
      ClassFunction psi = ClassFunction::by_name(fpsi);
      if (fclip) psi = psi.clipped();
      std::cout << "lambda,psi\n";
      for (double l : at) std::cout << fmt17(l) << ',' << fmt17(psi(l)) << '\n';
      if (integral.size() == 2) {
        const auto q = integral_I(psi, integral[0], integral[1]);
        std::cout << "integral," << fmt17(q.value) << ",error," << fmt17(q.error) << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
