#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "efkp/bounds.hpp"
#include "efkp/class_functions.hpp"
#include "efkp/game.hpp"
#include "efkp/numeric.hpp"

namespace efkp {

/// Countable mixture sum_k p_k K^{gamma_k} with gamma_k = psi(k)/sqrt(k),
/// truncated at k_max. Weight beyond k_max is held as cash, so the truncated
/// mixture is itself a legal strategy.
///
/// Accounts are stored as flat arrays; frozen ones are folded into a single
/// log-sum and dropped from the per-round loop.
class ValidityMixture : public Skeptic {
 public:
  /// `psi` should already be clipped. `weights` may extend past k_max.
  ValidityMixture(ClassFunction psi, MixtureWeights weights, std::int64_t k_max,
                  double delta = 0.01);
  /// Blocking weights built over [1, max(k_max, k_weights)].
  static ValidityMixture with_blocking(const ClassFunction& psi, std::int64_t k_max,
                                       std::int64_t k_weights = 0, double delta = 0.01);

  double initial_capital() const override { return 1.0; }
  double bet_fraction(const PathStats& before, double c) override;
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override;
  std::string name() const override;

  const ClassFunction& psi() const { return psi_; }
  const MixtureWeights& weights() const { return weights_; }
  std::int64_t k_max() const { return k_max_; }
  double delta() const { return delta_; }
  double cash() const { return cash_; }
  std::size_t open_count() const { return open_.size(); }

  // Per-account views, k = 1..k_max.
  double gamma(std::int64_t k) const { return gamma_[idx(k)]; }
  double p(std::int64_t k) const { return weights_.p[idx(k)]; }
  double a(std::int64_t k) const { return weights_.a[idx(k)]; }
  /// ln(K^{gamma_k}_n), initial capital 1.
  double account_log_value(std::int64_t k) const;
  bool frozen(std::int64_t k) const { return freeze_round_[idx(k)] >= 0; }
  /// Round at which account k froze, or -1.
  std::int64_t freeze_round(std::int64_t k) const { return freeze_round_[idx(k)]; }

 private:
  std::size_t idx(std::int64_t k) const { return static_cast<std::size_t>(k - 1); }

  ClassFunction psi_;
  MixtureWeights weights_;
  std::int64_t k_max_;
  double delta_;
  double cash_ = 0.0;
  double log_cash_ = 0.0;
  std::vector<double> gamma_;
  std::vector<double> log_p_;
  std::vector<double> growth_;  // sum of ln(1 + gamma_k x_i) while open
  std::vector<std::int64_t> freeze_round_;
  std::vector<std::uint32_t> open_;
  double log_frozen_ = kNegInf;  // ln of sum of p_k K^{gamma_k} over frozen k
  std::int64_t round_ = 0;
};

/// Outcome of the certificate at one round.
struct ValidityCertificate {
  bool applicable = false;  // hitting round with a full, materialized window
  std::string reason;       // why not applicable
  std::int64_t k_lo = 0;
  std::int64_t k_hi = 0;
  double log_lower_bound = 0.0;  // ln of a_{k_lo} (1/2 - psi/(2A^2)) e^{-1/2-2delta-C(1+delta)^4}
  double log_ZK = 0.0;
  BoundReport report;
};

/// Checks the lower-bound chain for Z K_n at a hitting round S >= A psi(A^2):
///   "validity_exponent"  min over the window of -psi(k)^2/2 + g_k S - g_k^2 A^2/2 >= -1/2 - 2 delta
///   "validity_remainder" max over the window of g_k^3 A^2 cbar <= C (1+delta)^4
///   "validity_psi_ratio" psi(A^2) <= 2 psi(k_lo)
///   "validity_cbar"      cbar < (1+delta) C A / psi(A^2)^3
///   "validity_open"      max over the window of g_k cbar <= delta, and no account frozen
///   "validity_lower"     Z K_n >= the final lower bound
ValidityCertificate validity_certificate(const ValidityMixture& m, const PathStats& stats,
                                         const BoundParams& params);

/// Closed form of the mixture on a path with constant c and x = +-c: account
/// k ends at (1 + g c)^h (1 - g c)^t, or stays at 1 if g c > delta. Used for
/// large Monte Carlo sweeps where the path enters only through h and t.
class ValidityTwoPoint {
 public:
  ValidityTwoPoint(const ValidityMixture& m, double c);
  double log_capital(std::int64_t heads, std::int64_t tails) const;

 private:
  std::vector<double> log_p_;
  std::vector<double> log_up_;
  std::vector<double> log_down_;
  double log_fixed_;  // cash plus accounts frozen at the first round
};

}  // namespace efkp
