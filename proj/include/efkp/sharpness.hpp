#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efkp/accounts.hpp"
#include "efkp/bounds.hpp"
#include "efkp/class_functions.hpp"
#include "efkp/game.hpp"

namespace efkp {

/// Cycle thresholds n_k = k^{beta k} (or a caller-supplied increasing list),
/// kept as logarithms because they leave the double range quickly.
class CycleSchedule {
 public:
  explicit CycleSchedule(double beta = 5.0);
  /// Explicit thresholds n_1 < n_2 < ...; cycles past the end never start.
  static CycleSchedule from_list(std::vector<double> thresholds);

  double beta() const { return beta_; }
  bool is_list() const { return !list_.empty(); }
  std::string describe() const;

  /// ln n_k (+inf past the end of a list).
  double log_n(std::int64_t k) const;
  /// n_k in double (may be +inf).
  double n(std::int64_t k) const;
  /// gamma_k = psi(n_{k+1}) k^2 / sqrt(n_{k+1}).
  double gamma(const ClassFunction& psi, std::int64_t k) const;
  /// max(1, ceil(ln k)): number of w-accounts in cycle k.
  static int accounts_in_cycle(std::int64_t k);
  /// ln of the freeze threshold e^{2(w+2)} n_{k+1} / k^4.
  double log_freeze_threshold(std::int64_t k, int w) const;
  /// Largest k with n_k <= A2 (0 if none).
  std::int64_t last_reached(double A2) const;

 private:
  double beta_;
  std::vector<double> list_;
};

// Stopping times on a finite path prefix. Round 0 is the initial state
// (S = A^2 = 0); round n refers to the state after event n.

/// min{n : A^2_n >= threshold}.
std::optional<std::int64_t> compute_tau(std::span<const PathEvent> path, double threshold);
/// min{n : gamma c_n > delta}: freeze round of a constant-proportion account.
std::optional<std::int64_t> freeze_time(std::span<const PathEvent> path, double gamma,
                                        double delta = 0.01);
/// min{n >= tau_k : c_n psi(A^2_{tau_k})^3 > (1+delta) C A_{n-1}}.
std::optional<std::int64_t> sigma_abort(std::span<const PathEvent> path, std::int64_t tau_k,
                                        double C, const ClassFunction& psi, double delta = 0.01);
/// min{n >= tau_k : S_n > A_n psi(A^2_n)} (strict).
std::optional<std::int64_t> nu_success(std::span<const PathEvent> path, std::int64_t tau_k,
                                       const ClassFunction& psi);

/// The per-cycle mixture D = (1/W) sum_w T^{gamma_k e^{-w}}, account w frozen
/// once A^2 >= e^{2(w+2)} n_{k+1}/k^4, and the rescaled process
/// Y = alpha + coef (alpha - D) with coef = W psi(n_{k+1}) e^{-psi^2/2} / D.
///
/// The T accounts see only the events of this cycle.
class CycleMixture {
 public:
  /// `start_A2` is the game's A^2 at tau_k; accounts whose threshold is
  /// already met stop at once.
  CycleMixture(std::int64_t k, const CycleSchedule& schedule, const ClassFunction& psi,
               const BoundParams& params, int nodes = 64, double start_A2 = 0.0,
               std::int64_t start_round = 0);

  std::int64_t k() const { return k_; }
  int W() const { return static_cast<int>(accounts_.size()); }
  double gamma() const { return gamma_; }
  double psi_next() const { return psi_next_; }
  double log_coef() const { return log_coef_; }
  double coef() const { return coef_; }

  const BuySellAccount& account(int w) const { return accounts_[static_cast<std::size_t>(w - 1)]; }
  /// Round at which account w reached its A^2 threshold (and stopped), if any.
  std::optional<std::int64_t> threshold_round(int w) const {
    return threshold_round_[static_cast<std::size_t>(w - 1)];
  }
  bool open(int w) const;
  const PathStats& local() const { return local_; }

  double d_value() const;
  double y_value() const;
  /// ln(Y/alpha), accurate when coef underflows.
  double log_y_ratio() const;

  /// D-units bet for the coming round (open accounts only).
  double d_bet(double c, std::int64_t round);
  double y_bet(double c, std::int64_t round) { return -coef_ * d_bet(c, round); }
  /// Apply x; `global_A2` is A^2 after the round, used for the w freezes.
  void update(const PathEvent& e, double global_A2, std::int64_t round);

 private:
  std::int64_t k_;
  double gamma_;
  double psi_next_;
  double alpha_;
  double log_coef_;
  double coef_;
  std::vector<BuySellAccount> accounts_;
  std::vector<double> log_thresholds_;
  std::vector<std::optional<std::int64_t>> threshold_round_;
  PathStats local_;
};

/// Claimed growth factor 1 + (1-delta)/D W psi(n_{k+1}) e^{-psi(n_{k+1})^2/2}.
struct GrowthClaim {
  double factor = 1.0;      // may round to exactly 1
  double log_excess = 0.0;  // ln(factor - 1)
};
GrowthClaim claimed_growth(std::int64_t k, const CycleSchedule& schedule, const ClassFunction& psi,
                           const BoundParams& params);

/// Cycle bounds at one round:
///   "remainder_const" (gamma_k e^{-w})^3 A^2 cbar <= (1+delta)^5 C e^6 for each open w
///   "d_upper"         D <= bar C_1 + 2/W e^{E} max over gamma in [gamma_k/k, gamma_k] of
///                     min{e^{S^2/(2A^2)} sqrt(2 pi)/(gamma A), e^{gamma S}} (cycle-local S, A)
///   "y_half"          Y >= alpha/2
/// `global` carries the game's A^2 and cbar. All records are in log form except y_half.
BoundReport y_bounds(const CycleMixture& cm, const PathStats& global, const BoundParams& params);

enum class CycleOutcome { Running, Advanced, AbortedSigma, SucceededNu, AbortedRange };
std::string to_string(CycleOutcome o);

struct CycleRecord {
  std::int64_t k = 0;
  std::int64_t tau_k = 0;
  std::optional<std::int64_t> tau_next;  // tau_{k+1} when the cycle advanced
  std::int64_t end_round = 0;  // latest round seen while running
  CycleOutcome outcome = CycleOutcome::Running;
  int W = 1;
  double y_start = 0.0;
  double y_min = 0.0;
  double y_end = 0.0;
  double d_end = 0.0;
  GrowthClaim claim;
  double realized_log_factor = 0.0;  // ln(Y_end / alpha)
};

void write_cycle_ledger_csv(std::ostream& out, const std::vector<CycleRecord>& ledger);

struct DynamicConfig {
  double C = 1.0;
  double delta = 0.01;
  std::optional<double> log_D;  // replaces the default D
  int nodes = 64;
  /// Re-entry test with the round index in place of A^2 (literal variant).
  bool literal_reentry = false;
  /// Evaluate y_bounds every round into bound_report().
  bool check_bounds = false;
  bool keep_bound_records = false;
};

/// The cycle-by-cycle strategy: run Y on [tau_k, tau_{k+1}], move on when the
/// cycle completes before sigma_{k,C} and nu_k, otherwise stop betting and
/// wait for a later tau_{k'} at which -A psi^U(A^2) <= S <= A psi(A^2).
/// A mid-cycle violation of the lower side also stops the cycle.
class DynamicStrategy : public Skeptic {
 public:
  DynamicStrategy(ClassFunction psi, CycleSchedule schedule, DynamicConfig config = {});

  double initial_capital() const override { return params_.alpha; }
  double bet_fraction(const PathStats& before, double c) override;
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override { return log_capital_; }
  std::string name() const override;

  enum class Phase { BeforeFirst, Running, Waiting };
  Phase phase() const { return phase_; }
  std::int64_t current_k() const { return k_; }
  const std::vector<CycleRecord>& ledger() const { return ledger_; }
  const CycleMixture* cycle() const { return cycle_.get(); }
  const BoundParams& params() const { return params_; }
  const BoundReport& bound_report() const { return report_; }

 private:
  void start_cycle(std::int64_t k, const PathStats& at);
  void close_cycle(CycleOutcome o, const PathStats& at, std::optional<std::int64_t> tau_next);
  void after_round(const PathStats& after, double c);
  bool reentry_ok(const PathStats& at) const;

  ClassFunction psi_;
  ClassFunction psi_upper_;
  CycleSchedule schedule_;
  DynamicConfig config_;
  BoundParams params_;

  Phase phase_ = Phase::BeforeFirst;
  std::int64_t k_ = 1;
  std::unique_ptr<CycleMixture> cycle_;
  double log_capital_;
  double log_capital_at_start_ = 0.0;
  double psi_at_tau_ = 0.0;
  double prev_A2_ = 0.0;
  std::int64_t next_candidate_ = 1;
  std::vector<CycleRecord> ledger_;
  BoundReport report_;
};

/// Mixture over C = 1..C_max with weights 2^{-C}; the leftover weight is cash,
/// so initial capital is alpha.
std::unique_ptr<MixtureSkeptic> outer_c_mixture(const ClassFunction& psi,
                                                const CycleSchedule& schedule, int C_max = 8,
                                                DynamicConfig base = {});

/// Compares J = int_{k_lo}^{k_hi} ln x f(x) dx, f(x) = psi(e^{beta x ln x}) e^{-psi^2/2},
/// against the sums: 1/2 sum_{k=lo+1}^{hi} ln k f(k) <= J <= 2 sum_{k=lo}^{hi-1} ln k f(k)
/// ("timescale_lower", "timescale_upper"), and checks the Jacobian identity
/// int psi e^{-psi^2/2} dl/l = beta int (ln x + 1) f(x) dx ("timescale_jacobian").
BoundReport timescale_equivalence_check(const ClassFunction& psi, std::int64_t k_lo,
                                        std::int64_t k_hi, double beta = 5.0);

/// The three finite-k sequences whose limits are 1, e^{-5} and 0 on the unit
/// path (A^2_n = n, so A^2_{tau_k} = n_k for integer n_k).
struct CycleTrend {
  std::int64_t k = 0;
  double psi_ratio = 0.0;   // psi^U(n_k) / psi(n_{k+1})
  double scaled_A2 = 0.0;   // k^5 A^2_{tau_k} / n_{k+1}
  double gamma_term = 0.0;  // gamma_k A_{tau_k} psi(n_{k+1})
};
std::vector<CycleTrend> unit_path_cycle_trends(const ClassFunction& psi,
                                               const CycleSchedule& schedule, std::int64_t k_lo,
                                               std::int64_t k_hi);

}  // namespace efkp
