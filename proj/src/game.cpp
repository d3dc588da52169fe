#include "efkp/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "efkp/numeric.hpp"

namespace efkp {

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double PathStats::A() const { return std::sqrt(A2); }

void PathStats::push(const PathEvent& e) {
  ++n;
  S += e.x;
  A2 += e.x * e.x;
  cbar = std::max(cbar, e.c);
}

void validate_event(const PathEvent& e) {
  if (!std::isfinite(e.c) || !std::isfinite(e.x)) {
    throw ProtocolError("non-finite announcement");
  }
  if (e.c < 0.0) {
    throw ProtocolError("Forecaster announced c = " + fmt17(e.c) + " < 0");
  }
  if (std::abs(e.x) > e.c) {
    throw ProtocolError("Reality announced |x| = " + fmt17(std::abs(e.x)) +
                        " > c = " + fmt17(e.c));
  }
}

double GameState::capital() const { return std::exp(log_capital); }

double LedgerEntry::capital() const { return std::exp(log_capital); }

GameState play_round(const GameState& state, Skeptic& skeptic,
                     const PathEvent& event, LedgerEntry* ledger,
                     const RunOptions& opts) {
  validate_event(event);
  const PathStats& before = state;
  double f = skeptic.bet_fraction(before, event.c);
  if (!std::isfinite(f)) {
    throw StrategyError(skeptic.name() + ": non-finite bet at round " +
                        std::to_string(state.n + 1));
  }
  if (state.log_capital == kNegInf) f = 0.0;

  GameState next = state;
  next.push(event);
  const double growth = 1.0 + f * event.x;
  if (growth < -opts.negative_tolerance) {
    throw StrategyError(skeptic.name() + ": capital would become negative at round " +
                        std::to_string(next.n) + " (1 + f x = " + fmt17(growth) + ")");
  }
  next.log_capital = growth > 0.0 ? state.log_capital + std::log1p(f * event.x) : kNegInf;
  skeptic.observe(next, event);

  if (ledger != nullptr) {
    ledger->n = next.n;
    ledger->c = event.c;
    ledger->fraction = f;
    ledger->M = f == 0.0 ? 0.0 : f * state.capital();
    ledger->x = event.x;
    ledger->S = next.S;
    ledger->A2 = next.A2;
    ledger->log_capital = next.log_capital;
  }
  return next;
}

Trajectory run_game(Skeptic& skeptic, PathSource& source, std::int64_t horizon,
                    const RunOptions& opts) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  Trajectory t;
  GameState state;
  const double alpha = skeptic.initial_capital();
  state.log_capital = std::log(alpha);
  t.summary.initial_capital = alpha;
  t.summary.min_log_capital = state.log_capital;
  t.summary.max_log_capital = state.log_capital;
  if (opts.record_ledger) t.ledger.reserve(static_cast<std::size_t>(horizon));

  for (std::int64_t i = 0; i < horizon; ++i) {
    const PathEvent e = source.next(state);
    LedgerEntry entry;
    state = play_round(state, skeptic, e, opts.record_ledger ? &entry : nullptr, opts);
    if (opts.record_ledger) t.ledger.push_back(entry);
    if (opts.on_round) opts.on_round(state, e);

    auto& s = t.summary;
    s.min_log_capital = std::min(s.min_log_capital, state.log_capital);
    s.max_log_capital = std::max(s.max_log_capital, state.log_capital);
    if (state.log_capital == kNegInf) {
      ++s.zero_capital_rounds;
    } else {
      const double own = skeptic.log_capital();
      const double r = std::abs(own - state.log_capital);
      if (!(r <= s.max_accounting_residual)) s.max_accounting_residual = r;
    }
  }
  t.summary.final_state = state;
  return t;
}

double replay_capital_linear(double initial_capital,
                             const std::vector<LedgerEntry>& ledger) {
  double k = initial_capital;
  for (const auto& e : ledger) k = k + e.M * e.x;
  return k;
}

double replay_log_capital(double initial_capital,
                          const std::vector<LedgerEntry>& ledger) {
  double lk = std::log(initial_capital);
  for (const auto& e : ledger) {
    const double g = 1.0 + e.fraction * e.x;
    lk = g > 0.0 ? lk + std::log1p(e.fraction * e.x) : kNegInf;
  }
  return lk;
}

VectorPathSource::VectorPathSource(std::vector<PathEvent> events)
    : events_(std::move(events)) {}

PathEvent VectorPathSource::next(const PathStats&) {
  if (pos_ >= events_.size()) throw std::out_of_range("path exhausted");
  return events_[pos_++];
}

std::string VectorPathSource::describe() const {
  return "vector:" + std::to_string(events_.size());
}

ConstantFractionSkeptic::ConstantFractionSkeptic(double alpha, double fraction)
    : alpha_(alpha), fraction_(fraction), log_capital_(std::log(alpha)) {}

void ConstantFractionSkeptic::observe(const PathStats&, const PathEvent& e) {
  const double g = 1.0 + fraction_ * e.x;
  log_capital_ = g > 0.0 ? log_capital_ + std::log1p(fraction_ * e.x) : kNegInf;
}

MixtureSkeptic::MixtureSkeptic(std::vector<std::unique_ptr<Skeptic>> parts,
                               std::vector<double> weights, double cash)
    : parts_(std::move(parts)), weights_(std::move(weights)), cash_(cash) {
  if (parts_.size() != weights_.size()) {
    throw std::invalid_argument("mixture: one weight per part required");
  }
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
  }
  if (!(cash_ >= 0.0)) throw std::invalid_argument("mixture: negative cash");
}

double MixtureSkeptic::initial_capital() const {
  double k = cash_;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    k += weights_[i] * parts_[i]->initial_capital();
  }
  return k;
}

double MixtureSkeptic::bet_fraction(const PathStats& before, double c) {
  // Sum of w_i f_i K_i over sum of w_i K_i + cash, scaled by the largest term.
  std::vector<double> logs(parts_.size());
  double m = cash_ > 0.0 ? std::log(cash_) : kNegInf;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    logs[i] = weights_[i] > 0.0 ? std::log(weights_[i]) + parts_[i]->log_capital() : kNegInf;
    m = std::max(m, logs[i]);
  }
  double num = 0.0;
  double den = cash_ > 0.0 ? std::exp(std::log(cash_) - m) : 0.0;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const double f = parts_[i]->bet_fraction(before, c);
    if (logs[i] == kNegInf) continue;
    const double s = std::exp(logs[i] - m);
    num += f * s;
    den += s;
  }
  return den > 0.0 ? num / den : 0.0;
}

void MixtureSkeptic::observe(const PathStats& after, const PathEvent& e) {
  for (auto& p : parts_) p->observe(after, e);
}

double MixtureSkeptic::log_capital() const {
  std::vector<double> logs;
  logs.reserve(parts_.size() + 1);
  if (cash_ > 0.0) logs.push_back(std::log(cash_));
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (weights_[i] > 0.0) logs.push_back(std::log(weights_[i]) + parts_[i]->log_capital());
  }
  return log_sum_exp(logs);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  out << "n,c,M,x,S,A2,capital,log_capital\n";
  out << "0,0,0,0,0,0," << fmt17(t.summary.initial_capital) << ','
      << fmt17(std::log(t.summary.initial_capital)) << '\n';
  for (const auto& e : t.ledger) {
    out << e.n << ',' << fmt17(e.c) << ',' << fmt17(e.M) << ',' << fmt17(e.x) << ','
        << fmt17(e.S) << ',' << fmt17(e.A2) << ',' << fmt17(e.capital()) << ','
        << fmt17(e.log_capital) << '\n';
  }
}

std::string summary_json(const Trajectory& t, const std::string& skeptic,
                         const std::string& source) {
  const auto& s = t.summary;
  const auto& f = s.final_state;
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return fmt17(v);
  };
  nlohmann::ordered_json j;
  j["skeptic"] = skeptic;
  j["source"] = source;
  j["rounds"] = f.n;
  j["initial_capital"] = num(s.initial_capital);
  j["final"] = {{"S", num(f.S)},          {"A2", num(f.A2)},
                {"cbar", num(f.cbar)},    {"capital", num(f.capital())},
                {"log_capital", num(f.log_capital)}};
  j["min_log_capital"] = num(s.min_log_capital);
  j["max_log_capital"] = num(s.max_log_capital);
  j["max_accounting_residual"] = num(s.max_accounting_residual);
  j["negative_capital_rounds"] = s.negative_capital_rounds;
  j["zero_capital_rounds"] = s.zero_capital_rounds;
  return j.dump(2);
}

void write_path_jsonl(std::ostream& out, const std::vector<PathEvent>& path) {
  for (const auto& e : path) {
    out << "{\"c\": " << fmt17(e.c) << ", \"x\": " << fmt17(e.x) << "}\n";
  }
}

std::vector<PathEvent> read_path_jsonl(std::istream& in) {
  std::vector<PathEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("c").get<double>(), j.at("x").get<double>()});
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error("path file line " + std::to_string(lineno) + ": " +
                               ex.what());
    }
  }
  return out;
}

}  // namespace efkp
