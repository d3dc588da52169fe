#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "efkp/class_functions.hpp"
#include "efkp/game.hpp"

namespace efkp {

/// Parsed generator string "kind:key=val,key=val".
struct GeneratorSpec {
  std::string kind;
  std::map<std::string, std::string> params;

  static GeneratorSpec parse(const std::string& text);
  std::string str() const;

  double get(const std::string& key, double fallback) const;
  std::uint64_t get_seed(std::uint64_t fallback = 0) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
};

/// 64-bit stream for one (master seed, replication) pair.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);
/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);

// Generator kinds:
//   bernoulli-symmetric      c (1): x = +-c with equal odds
//   uniform-bounded          c (1), cmin: c_n uniform on [cmin, c] when cmin given, x uniform on [-c_n, c_n]
//   omega-C-margin           C (1), margin (0.9), delta (0.01), warmup (16), psi (lower):
//                            unit rounds until A^2 >= warmup, then
//                            c_n = margin (1-delta) C A_{n-1}/psi(A^2_{n-1})^3, x = +-c_n
//   omega-0                  r (0.5), c0 (1): c_n = c0 r^n, x = +-c_n
//   omega-infty-spike        C (1), margin (0.9), period (400), drift (100), step (1), warmup (16), psi (lower):
//                            margin path; once per period a spike with
//                            c = (1 + step j) C A_{n-1}/psi^3 and x = +c at spike j, followed by
//                            `drift` margin rounds with x = +c that push S above A psi(A^2)
//   adversarial-upper-crossing  C (1), cap (0.02), warmup (16), warmup_c (cap), psi (lower):
//                            rounds at warmup_c until A^2 >= warmup, then
//                            c_n = min(cap, C A_{n-1}/psi(A^2_{n-1})^3); always x = +c_n
//   boundary-stress          gamma (0.001), kappa (1), c (1), lead (200), length (400):
//                            random lead-in, steering and a final step that puts
//                            S = kappa gamma A^2 on the last round
//   replay-file              path: JSON-lines file, errors when exhausted
// Every stochastic kind takes seed (0); the replication index selects the stream.
std::unique_ptr<PathSource> make_source(const GeneratorSpec& spec, std::uint64_t replication = 0);
std::unique_ptr<PathSource> make_source(const std::string& spec, std::uint64_t replication = 0);

/// Draws n events from `source`, feeding it the running statistics.
std::vector<PathEvent> generate_path(PathSource& source, std::int64_t n);

/// Path of length `length` (>= lead + 2) whose last round sits on S = kappa gamma A^2.
std::vector<PathEvent> boundary_path(double gamma, double kappa, double c, std::int64_t lead,
                                     std::int64_t length, std::uint64_t seed);

struct ClassCheck {
  bool member = false;
  double statistic = 0.0;  // the quantity compared against the class threshold
  std::string detail;
};

/// Post-hoc class membership for paths produced by the generator kinds above:
///   omega-C-margin / adversarial: max over post-warmup n of c_n psi(A^2_n)^3 / A_n <= (1-delta) C
///     (adversarial uses C itself as the threshold, so the check is c_n psi^3/A_{n-1} <= C)
///   omega-0: A^2 stays below c0^2 r^2 / (1 - r^2)
///   omega-infty-spike: every spike sets a new record of c_n psi(A^2_{n-1})^3 / A_{n-1}
///   bernoulli / uniform / boundary: protocol legality only
ClassCheck classify(const std::vector<PathEvent>& path, const GeneratorSpec& spec);

}  // namespace efkp
