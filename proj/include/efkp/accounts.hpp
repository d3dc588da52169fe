#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efkp/bounds.hpp"
#include "efkp/game.hpp"

namespace efkp {

/// Initial capital of the uniform mixture: the length of [2/e, 1].
inline constexpr double kMixtureAlpha = 1.0 - 2.0 / 2.718281828459045235360287;
inline constexpr double kMixtureLower = 2.0 / 2.718281828459045235360287;

/// Gauss-Legendre nodes and weights on [lo, hi] (Newton iteration on P_n).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(int n, double lo, double hi);

/// Constant-proportion account with freezing.
///
/// Bets gamma * capital while gamma * c_n <= delta; at the first round where
/// gamma * c_n > delta it freezes for good and its capital stays constant.
class Account {
 public:
  explicit Account(double gamma, double delta = 0.01, double alpha = 1.0);

  double gamma() const { return gamma_; }
  double delta() const { return delta_; }
  double alpha() const { return alpha_; }
  bool frozen() const { return frozen_; }
  std::optional<std::int64_t> freeze_round() const { return freeze_round_; }

  /// ln(K_n / alpha) = sum of ln(1 + gamma x_i) over the open rounds.
  double log_growth() const { return log_growth_; }
  double log_value() const;
  double value() const;

  /// Bet M_n for `round` given c_n; freezes (and returns 0) if gamma c_n > delta.
  double bet(double c, std::int64_t round);
  void update(double x);

 private:
  double gamma_;
  double delta_;
  double alpha_;
  double log_growth_ = 0.0;
  bool frozen_ = false;
  std::optional<std::int64_t> freeze_round_;
};

inline double cp_bet(Account& account, double c_next, std::int64_t round) {
  return account.bet(c_next, round);
}

/// Checks both sides of
///   exp(-g^3 A^2 cbar) exp(g S - g^2 A^2 / 2) <= K / alpha <= exp(+g^3 A^2 cbar) exp(...)
/// in log form. Throws std::logic_error for frozen accounts or g cbar > delta.
BoundReport cp_bound_check(const Account& account, const PathStats& stats);

/// Uniform mixture over proportions u*gamma, u in [2/e, 1], realized as a
/// Gauss-Legendre discrete mixture. The discrete object is itself a capital
/// process, so the accounting identity holds exactly.
class UniformMixtureAccount {
 public:
  explicit UniformMixtureAccount(double gamma, double delta = 0.01, int nodes = 64,
                                 bool exact_poly = false);

  double gamma() const { return gamma_; }
  bool frozen() const { return frozen_; }
  std::optional<std::int64_t> freeze_round() const { return freeze_round_; }
  std::int64_t rounds() const { return rounds_; }

  double value() const;
  double log_value() const;
  double bet(double c, std::int64_t round);
  void update(double x);
  /// Forces the freeze (used when a composite position closes).
  void freeze(std::int64_t round);

  std::span<const double> nodes() const { return rule_.nodes; }
  std::span<const double> weights() const { return rule_.weights; }
  std::span<const double> log_node_values() const { return log_nodes_; }

  bool has_exact() const { return exact_; }
  /// Exact integral of prod(1 + u gamma x_i) over [2/e, 1] from the
  /// polynomial coefficients in u. Requires exact_poly mode.
  double exact_value() const;

 private:
  double gamma_;
  double delta_;
  QuadratureRule rule_;
  std::vector<double> log_nodes_;
  bool exact_;
  std::vector<double> coef_;
  bool frozen_ = false;
  std::optional<std::int64_t> freeze_round_;
  std::int64_t rounds_ = 0;
};

/// Case bounds on Q (three cases on S relative to 2 g A^2/e and g A^2, plus
/// the Gaussian-integral bound). Cases within a relative 1e-12 band of a
/// boundary are evaluated on both sides.
BoundReport q_upper_bounds(const UniformMixtureAccount& q, const PathStats& stats);

/// T = 2 Q^gamma - K^{gamma e}: two units of the mixture bought, one
/// constant-proportion account at gamma*e sold. Both legs freeze at the
/// first round where gamma e c_n > delta.
class BuySellAccount {
 public:
  explicit BuySellAccount(double gamma, double delta = 0.01, int nodes = 64);

  double gamma() const { return q_.gamma(); }
  bool frozen() const { return frozen_; }
  std::optional<std::int64_t> freeze_round() const { return freeze_round_; }
  const UniformMixtureAccount& q() const { return q_; }
  const Account& sold() const { return sold_; }

  double value() const;
  double bet(double c, std::int64_t round);
  void update(double x);
  void freeze(std::int64_t round);

 private:
  UniformMixtureAccount q_;
  Account sold_;
  double delta_;
  bool frozen_ = false;
  std::optional<std::int64_t> freeze_round_;
};

/// Buy/sell bounds: T <= C_1 when S <= g A^2/e or S >= e g A^2, and
/// T <= 2 exp(g^3 A^2 cbar) min{exp(S^2/(2A^2)) sqrt(2 pi)/(g A), exp(g S)}
/// in between.
BoundReport t_bounds(const BuySellAccount& t, const PathStats& stats);

/// Constant-proportion Skeptic (initial capital alpha).
class ConstantProportionSkeptic : public Skeptic {
 public:
  explicit ConstantProportionSkeptic(double gamma, double delta = 0.01, double alpha = 1.0);
  double initial_capital() const override { return account_.alpha(); }
  double bet_fraction(const PathStats& before, double c) override;
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override { return account_.log_value(); }
  std::string name() const override;
  const Account& account() const { return account_; }

 private:
  Account account_;
};

/// The uniform mixture Q as a Skeptic (initial capital 1 - 2/e).
class UniformMixtureSkeptic : public Skeptic {
 public:
  explicit UniformMixtureSkeptic(double gamma, double delta = 0.01, int nodes = 64);
  double initial_capital() const override { return kMixtureAlpha; }
  double bet_fraction(const PathStats& before, double c) override;
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override { return q_.log_value(); }
  std::string name() const override;
  const UniformMixtureAccount& account() const { return q_; }

 private:
  UniformMixtureAccount q_;
};

}  // namespace efkp
