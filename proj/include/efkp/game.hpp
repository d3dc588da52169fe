#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace efkp {

/// One round of announcements: Forecaster's bound c and Reality's move x.
struct PathEvent {
  double c = 0.0;
  double x = 0.0;
};

/// Thrown when Forecaster or Reality break the protocol (c < 0, |x| > c, NaN).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a Skeptic strategy would drive capital below zero.
class StrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Running statistics of a path: n, S_n, A_n^2 and the running max of c.
struct PathStats {
  std::int64_t n = 0;
  double S = 0.0;
  double A2 = 0.0;
  double cbar = 0.0;

  double A() const;
  void push(const PathEvent& e);
};

/// Throws ProtocolError unless 0 <= c, |x| <= c, both finite.
void validate_event(const PathEvent& e);

/// Protocol state after round n. Capital is carried in the log domain so that
/// long horizons neither overflow nor underflow; capital() may return inf.
struct GameState : PathStats {
  double log_capital = 0.0;

  double capital() const;
};

/// Skeptic: sees the history and c_n, announces M_n before x_n is revealed.
///
/// Bets are expressed relative to current capital (M_n / K_{n-1}); the engine
/// multiplies back. A strategy with zero capital must bet zero.
class Skeptic {
 public:
  virtual ~Skeptic() = default;

  virtual double initial_capital() const = 0;
  virtual double bet_fraction(const PathStats& before, double c) = 0;
  virtual void observe(const PathStats& after, const PathEvent& e) = 0;
  /// The strategy's own bookkeeping of its capital, used to cross-check the
  /// engine's accounting.
  virtual double log_capital() const = 0;
  virtual std::string name() const = 0;
};

/// Forecaster and Reality combined: produces the next event given the path
/// so far (adaptive generators read A_{n-1}).
class PathSource {
 public:
  virtual ~PathSource() = default;
  virtual PathEvent next(const PathStats& before) = 0;
  virtual std::string describe() const = 0;
};

struct LedgerEntry {
  std::int64_t n = 0;
  double c = 0.0;
  double fraction = 0.0;  // M_n / K_{n-1}
  double M = 0.0;
  double x = 0.0;
  double S = 0.0;
  double A2 = 0.0;
  double log_capital = 0.0;

  double capital() const;
};

struct TrajectorySummary {
  GameState final_state;
  double initial_capital = 0.0;
  double min_log_capital = 0.0;
  double max_log_capital = 0.0;
  /// max |engine log-capital - skeptic log-capital| over all rounds.
  double max_accounting_residual = 0.0;
  std::int64_t negative_capital_rounds = 0;
  std::int64_t zero_capital_rounds = 0;
};

struct Trajectory {
  std::vector<LedgerEntry> ledger;  // empty when recording is off
  TrajectorySummary summary;
};

struct RunOptions {
  bool record_ledger = true;
  /// Tolerance below zero tolerated for 1 + f x before a StrategyError.
  double negative_tolerance = 1e-12;
  /// Called after every round with the new state and the event just played.
  std::function<void(const GameState&, const PathEvent&)> on_round;
};

/// One protocol round: asks `skeptic` for its bet on `event.c`, reveals
/// `event.x`, and updates capital by M_n x_n.
GameState play_round(const GameState& state, Skeptic& skeptic,
                     const PathEvent& event, LedgerEntry* ledger = nullptr,
                     const RunOptions& opts = {});

/// Runs `horizon` rounds of the protocol.
Trajectory run_game(Skeptic& skeptic, PathSource& source, std::int64_t horizon,
                    const RunOptions& opts = {});

/// Recomputes the capital sequence from a ledger using the protocol line
/// K_n = K_{n-1} + M_n x_n (linear domain). Returns the final capital.
double replay_capital_linear(double initial_capital,
                             const std::vector<LedgerEntry>& ledger);

/// Same replay carried in the log domain: ln K_n = ln K_{n-1} + ln(1 + f_n x_n).
double replay_log_capital(double initial_capital,
                          const std::vector<LedgerEntry>& ledger);

/// Replays a fixed list of events, then throws when exhausted.
class VectorPathSource : public PathSource {
 public:
  explicit VectorPathSource(std::vector<PathEvent> events);
  PathEvent next(const PathStats& before) override;
  std::string describe() const override;

 private:
  std::vector<PathEvent> events_;
  std::size_t pos_ = 0;
};

/// Constant-bet helper for tests and referee use: bets a fixed fraction of
/// capital every round.
class ConstantFractionSkeptic : public Skeptic {
 public:
  ConstantFractionSkeptic(double alpha, double fraction);
  double initial_capital() const override { return alpha_; }
  double bet_fraction(const PathStats&, double) override { return fraction_; }
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override { return log_capital_; }
  std::string name() const override { return "constant-fraction"; }

 private:
  double alpha_;
  double fraction_;
  double log_capital_;
};

/// Weighted mixture of skeptics plus a cash position. Capital equals
/// sum_i w_i K^i + cash at every round.
class MixtureSkeptic : public Skeptic {
 public:
  MixtureSkeptic(std::vector<std::unique_ptr<Skeptic>> parts,
                 std::vector<double> weights, double cash);

  double initial_capital() const override;
  double bet_fraction(const PathStats& before, double c) override;
  void observe(const PathStats& after, const PathEvent& e) override;
  double log_capital() const override;
  std::string name() const override { return "mixture"; }

  std::size_t size() const { return parts_.size(); }
  Skeptic& part(std::size_t i) { return *parts_[i]; }
  const Skeptic& part(std::size_t i) const { return *parts_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  double cash() const { return cash_; }

 private:
  std::vector<std::unique_ptr<Skeptic>> parts_;
  std::vector<double> weights_;
  double cash_;
};

// Trajectory export: CSV (n,c,M,x,S,A2,capital,log_capital) and a JSON summary.
void write_trajectory_csv(std::ostream& out, const Trajectory& t);
std::string summary_json(const Trajectory& t, const std::string& skeptic,
                         const std::string& source);

// Path files: one JSON object per line, {"c": float, "x": float}.
void write_path_jsonl(std::ostream& out, const std::vector<PathEvent>& path);
std::vector<PathEvent> read_path_jsonl(std::istream& in);

}  // namespace efkp
