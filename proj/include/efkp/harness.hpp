#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "efkp/bounds.hpp"
#include "efkp/game.hpp"

namespace efkp {

/// Environment variable that prefixes relative output directories.
inline constexpr const char* kOutputRootEnv = "EFKP_OUT_ROOT";

/// Everything that determines an experiment's output. Plain "key = value"
/// text, '#' starts a comment.
struct ExperimentConfig {
  std::string strategy = "validity";  // cp:gamma=G | q:gamma=G | validity | dynamic | outer
  std::string path = "bernoulli-symmetric";
  std::int64_t horizon = 1000;
  std::int64_t replications = 1;
  std::uint64_t seed = 0;
  std::string psi = "upper";
  double beta = 5.0;
  double C = 1.0;
  int C_max = 8;
  std::int64_t k_max = 1000000;
  double delta = 0.01;
  int nodes = 64;
  std::optional<double> log_D;
  bool literal_reentry = false;
  bool ledger = true;
  bool bound_checks = true;
  bool strict = false;
  int threads = 1;
  std::string out_dir = "efkp-out";

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig from_file(const std::string& path);
  /// Sets one key from its text form; throws std::invalid_argument on unknown keys.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  /// out_dir, placed under $EFKP_OUT_ROOT when that is set and out_dir is relative.
  std::filesystem::path resolved_out_dir() const;
};

/// Builds the configured Skeptic.
std::unique_ptr<Skeptic> make_skeptic(const ExperimentConfig& config);

struct ReplicationResult {
  std::int64_t index = 0;
  TrajectorySummary summary;
  std::map<std::string, BoundStats> bounds;
  std::int64_t violations = 0;
  std::int64_t certificate_rounds = 0;
  std::int64_t certificate_passes = 0;
  std::int64_t cycles = 0;
  std::string error;  // protocol or strategy error, empty if none
};

struct ResultBundle {
  std::vector<ReplicationResult> replications;
  std::map<std::string, BoundStats> bounds;
  double mean_final_capital = 0.0;
  double std_error = 0.0;
  std::int64_t total_violations = 0;
  std::int64_t errors = 0;
  bool strict = false;

  /// Nonzero in strict mode iff any violation or error was recorded.
  int exit_code() const;
  std::string summary_json() const;
};

/// Runs all replications (parallel over replications only) and writes, under
/// the output directory: config.txt, summary.json, and per replication
/// rep_NNNNN/{summary.json, trajectory.csv, bounds.csv, cycles.csv}.
/// Pass write_files = false to keep everything in memory.
ResultBundle run_experiment(const ExperimentConfig& config, bool write_files = true);

struct VerifyOptions {
  std::vector<double> gammas{0.001, 0.003, 0.01};
  double delta = 0.01;
  int nodes = 64;
  /// Also run the validity mixture and its certificate at hitting rounds.
  bool validity = false;
  std::string psi = "upper";
  std::int64_t k_max = 1000;
  double C = 1.0;
  bool keep_records = true;
};

/// Replays a path through constant-proportion, uniform-mixture and buy/sell
/// accounts at each gamma and evaluates every per-round bound while the
/// accounts are open.
BoundReport verify_all_bounds(const std::vector<PathEvent>& path, const VerifyOptions& opts = {});

}  // namespace efkp
