#include "efkp/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "efkp/numeric.hpp"

namespace efkp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

}  // namespace

// ---------------------------------------------------------------------------

CycleSchedule::CycleSchedule(double beta) : beta_(beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("CycleSchedule: beta must be positive");
}

CycleSchedule CycleSchedule::from_list(std::vector<double> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("CycleSchedule: empty threshold list");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
      throw std::invalid_argument("CycleSchedule: thresholds must be positive and increasing");
    }
  }
  CycleSchedule s(1.0);
  s.list_ = std::move(thresholds);
  return s;
}

std::string CycleSchedule::describe() const {
  if (is_list()) return "list:" + std::to_string(list_.size());
  return "beta=" + fmt17(beta_);
}

double CycleSchedule::log_n(std::int64_t k) const {
  if (k < 1) throw std::invalid_argument("CycleSchedule: k must be >= 1");
  if (is_list()) {
    return k <= static_cast<std::int64_t>(list_.size()) ? std::log(list_[static_cast<std::size_t>(k - 1)])
                                                         : kInf;
  }
  const double kd = static_cast<double>(k);
  return beta_ * kd * std::log(kd);
}

double CycleSchedule::n(std::int64_t k) const {
  if (k < 1) throw std::invalid_argument("CycleSchedule: k must be >= 1");
  if (is_list()) {
    return k <= static_cast<std::int64_t>(list_.size()) ? list_[static_cast<std::size_t>(k - 1)] : kInf;
  }
  // pow keeps integer thresholds such as 2^10 exact.
  const double kd = static_cast<double>(k);
  return std::pow(kd, beta_ * kd);
}

double CycleSchedule::gamma(const ClassFunction& psi, std::int64_t k) const {
  const double ln_next = log_n(k + 1);
  if (!std::isfinite(ln_next)) return 0.0;
  const double kd = static_cast<double>(k);
  return psi.at_log(ln_next) * kd * kd * std::exp(-0.5 * ln_next);
}

int CycleSchedule::accounts_in_cycle(std::int64_t k) {
  if (k < 1) throw std::invalid_argument("accounts_in_cycle: k must be >= 1");
  return std::max(1, static_cast<int>(std::ceil(std::log(static_cast<double>(k)))));
}

double CycleSchedule::log_freeze_threshold(std::int64_t k, int w) const {
  return 2.0 * (w + 2) + log_n(k + 1) - 4.0 * std::log(static_cast<double>(k));
}

std::int64_t CycleSchedule::last_reached(double A2) const {
  std::int64_t k = 0;
  while (A2 >= n(k + 1)) ++k;
  return k;
}

// ---------------------------------------------------------------------------

std::optional<std::int64_t> compute_tau(std::span<const PathEvent> path, double threshold) {
  PathStats st;
  if (st.A2 >= threshold) return 0;
  for (const auto& e : path) {
    st.push(e);
    if (st.A2 >= threshold) return st.n;
  }
  return std::nullopt;
}

std::optional<std::int64_t> freeze_time(std::span<const PathEvent> path, double gamma,
                                        double delta) {
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (gamma * path[i].c > delta) return static_cast<std::int64_t>(i + 1);
  }
  return std::nullopt;
}

std::optional<std::int64_t> sigma_abort(std::span<const PathEvent> path, std::int64_t tau_k,
                                        double C, const ClassFunction& psi, double delta) {
  PathStats st;
  double psi_tau = tau_k == 0 ? psi.at_log(safe_log(0.0)) : 0.0;
  for (const auto& e : path) {
    const double prev_A = st.A();
    st.push(e);
    if (st.n == tau_k) psi_tau = psi.at_log(safe_log(st.A2));
    if (st.n < tau_k) continue;
    if (e.c * psi_tau * psi_tau * psi_tau > (1.0 + delta) * C * prev_A) return st.n;
  }
  return std::nullopt;
}

std::optional<std::int64_t> nu_success(std::span<const PathEvent> path, std::int64_t tau_k,
                                       const ClassFunction& psi) {
  PathStats st;
  for (const auto& e : path) {
    st.push(e);
    if (st.n < tau_k || !(st.A2 > 0.0)) continue;
    if (st.S > st.A() * psi.at_log(std::log(st.A2))) return st.n;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

CycleMixture::CycleMixture(std::int64_t k, const CycleSchedule& schedule, const ClassFunction& psi,
                           const BoundParams& params, int nodes, double start_A2,
                           std::int64_t start_round)
    : k_(k),
      gamma_(schedule.gamma(psi, k)),
      psi_next_(psi.at_log(schedule.log_n(k + 1))),
      alpha_(params.alpha) {
  const int W = CycleSchedule::accounts_in_cycle(k);
  log_coef_ = std::log(static_cast<double>(W)) + std::log(psi_next_) -
              0.5 * psi_next_ * psi_next_ - params.log_D;
  coef_ = std::exp(log_coef_);
  accounts_.reserve(static_cast<std::size_t>(W));
  const double ln_A2 = safe_log(start_A2);
  for (int w = 1; w <= W; ++w) {
    accounts_.emplace_back(gamma_ * std::exp(-static_cast<double>(w)), params.delta, nodes);
    log_thresholds_.push_back(schedule.log_freeze_threshold(k, w));
    threshold_round_.push_back(ln_A2 >= log_thresholds_.back() ? std::optional(start_round)
                                                               : std::nullopt);
  }
}

bool CycleMixture::open(int w) const {
  return !account(w).frozen() && !threshold_round(w).has_value();
}

double CycleMixture::d_value() const {
  double s = 0.0;
  for (const auto& t : accounts_) s += t.value();
  return s / static_cast<double>(accounts_.size());
}

double CycleMixture::y_value() const { return alpha_ + coef_ * (alpha_ - d_value()); }

double CycleMixture::log_y_ratio() const {
  const double gap = alpha_ - d_value();
  if (gap == 0.0) return 0.0;
  const double t = std::exp(log_coef_ + std::log(std::abs(gap)) - std::log(alpha_));
  return std::log1p(gap > 0.0 ? t : -t);
}

double CycleMixture::d_bet(double c, std::int64_t round) {
  double m = 0.0;
  for (int w = 1; w <= W(); ++w) {
    if (threshold_round(w)) continue;
    m += accounts_[static_cast<std::size_t>(w - 1)].bet(c, round);
  }
  return m / static_cast<double>(W());
}

void CycleMixture::update(const PathEvent& e, double global_A2, std::int64_t round) {
  local_.push(e);
  const double ln_A2 = safe_log(global_A2);
  for (int w = 1; w <= W(); ++w) {
    const auto i = static_cast<std::size_t>(w - 1);
    if (threshold_round_[i]) continue;
    accounts_[i].update(e.x);
    if (ln_A2 >= log_thresholds_[i]) threshold_round_[i] = round;
  }
}

GrowthClaim claimed_growth(std::int64_t k, const CycleSchedule& schedule, const ClassFunction& psi,
                           const BoundParams& params) {
  const double ps = psi.at_log(schedule.log_n(k + 1));
  const double W = CycleSchedule::accounts_in_cycle(k);
  GrowthClaim g;
  g.log_excess = std::log1p(-params.delta) + std::log(W) + std::log(ps) - 0.5 * ps * ps - params.log_D;
  g.factor = 1.0 + std::exp(g.log_excess);
  return g;
}

namespace {

// ln of max over g in [lo, hi] of min{e^{S^2/(2A^2)} sqrt(2 pi)/(g A), e^{g S}}.
double log_max_min(double S, double A2, double lo, double hi) {
  if (!(A2 > 0.0)) return std::max(lo * S, hi * S);
  auto gauss = [&](double g) { return S * S / (2.0 * A2) + kHalfLog2Pi - std::log(g) - 0.5 * std::log(A2); };
  auto expo = [&](double g) { return g * S; };
  if (S < 0.0) return std::min(gauss(lo), expo(lo));
  // gauss - expo is decreasing in g.
  if (gauss(lo) <= expo(lo)) return gauss(lo);
  if (gauss(hi) >= expo(hi)) return expo(hi);
  double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++i) {
    const double m = 0.5 * (a + b);
    const double g = std::exp(m);
    if (gauss(g) > expo(g)) a = m; else b = m;
  }
  return expo(std::exp(b));
}

}  // namespace

BoundReport y_bounds(const CycleMixture& cm, const PathStats& global, const BoundParams& params) {
  BoundReport r;
  const std::int64_t n = global.n;
  const double E = params.remainder_bound();
  const double ln_E = std::log(E);
  for (int w = 1; w <= cm.W(); ++w) {
    if (!cm.open(w)) continue;
    const double g = cm.gamma() * std::exp(-static_cast<double>(w));
    const double lhs = 3.0 * safe_log(g) + safe_log(global.A2) + safe_log(global.cbar);
    r.add({n, "remainder_const", "w=" + std::to_string(w), lhs, ln_E, true});
  }
  const double d = cm.d_value();
  const auto& loc = cm.local();
  const double hi = cm.gamma(), lo = cm.gamma() / static_cast<double>(cm.k());
  double rhs = params.log_C1bar;
  if (hi > 0.0) {
    rhs = log_add_exp(rhs, std::log(2.0 / cm.W()) + E + log_max_min(loc.S, loc.A2, lo, hi));
  }
  r.add({n, "d_upper", "-", safe_log(d), rhs, true});
  r.add({n, "y_half", "-", params.alpha / 2.0, cm.y_value(), false});
  return r;
}

std::string to_string(CycleOutcome o) {
  switch (o) {
    case CycleOutcome::Running: return "running";
    case CycleOutcome::Advanced: return "advanced";
    case CycleOutcome::AbortedSigma: return "aborted-sigma";
    case CycleOutcome::SucceededNu: return "succeeded-nu";
    case CycleOutcome::AbortedRange: return "aborted-range";
  }
  return "?";
}

void write_cycle_ledger_csv(std::ostream& out, const std::vector<CycleRecord>& ledger) {
  out << "k,tau_k,tau_k1,end_round,outcome,W,y_start,y_min,y_end,d_end,growth_factor,"
         "log_growth_excess,realized_log_factor\n";
  for (const auto& c : ledger) {
    out << c.k << ',' << c.tau_k << ',' << (c.tau_next ? std::to_string(*c.tau_next) : "") << ','
        << c.end_round << ',' << to_string(c.outcome) << ',' << c.W << ',' << fmt17(c.y_start) << ','
        << fmt17(c.y_min) << ',' << fmt17(c.y_end) << ',' << fmt17(c.d_end) << ','
        << fmt17(c.claim.factor) << ',' << fmt17(c.claim.log_excess) << ','
        << fmt17(c.realized_log_factor) << '\n';
  }
}

// ---------------------------------------------------------------------------

DynamicStrategy::DynamicStrategy(ClassFunction psi, CycleSchedule schedule, DynamicConfig config)
    : psi_(std::move(psi)),
      psi_upper_(ClassFunction::builtin_upper().clipped(
          psi_.clip_threshold() > 0.0 ? psi_.clip_threshold() : kDefaultClipThreshold)),
      schedule_(std::move(schedule)),
      config_(config),
      params_(BoundParams::make(config.C, config.delta)) {
  if (config_.log_D) params_ = params_.with_log_D(*config_.log_D);
  log_capital_ = std::log(params_.alpha);
  report_.set_keep_records(config_.keep_bound_records);
}

std::string DynamicStrategy::name() const {
  return "dynamic:C=" + fmt17(config_.C) + ",psi=" + psi_.name() + "," + schedule_.describe();
}

double DynamicStrategy::bet_fraction(const PathStats& before, double c) {
  if (phase_ != Phase::Running) return 0.0;
  const double m = cycle_->y_bet(c, before.n + 1);
  return m == 0.0 ? 0.0 : m / cycle_->y_value();
}

void DynamicStrategy::observe(const PathStats& after, const PathEvent& e) {
  if (phase_ == Phase::Running) {
    cycle_->update(e, after.A2, after.n);
    log_capital_ = log_capital_at_start_ + cycle_->log_y_ratio();
    auto& rec = ledger_.back();
    rec.y_min = std::min(rec.y_min, cycle_->y_value());
    rec.end_round = after.n;
    rec.y_end = cycle_->y_value();
    rec.d_end = cycle_->d_value();
    rec.realized_log_factor = cycle_->log_y_ratio();
    if (config_.check_bounds) report_.append(y_bounds(*cycle_, after, params_));
  }
  after_round(after, e.c);
  prev_A2_ = after.A2;
}

void DynamicStrategy::after_round(const PathStats& at, double c) {
  for (;;) {
    if (phase_ == Phase::BeforeFirst) {
      if (!(at.A2 >= schedule_.n(1))) return;
      start_cycle(1, at);
      continue;
    }
    if (phase_ == Phase::Waiting) {
      if (!(at.A2 >= schedule_.n(next_candidate_))) return;
      const std::int64_t kp = schedule_.last_reached(at.A2);
      if (!reentry_ok(at)) {
        next_candidate_ = kp + 1;
        return;
      }
      start_cycle(kp, at);
      continue;
    }
    const double A = at.A();
    const double bound_now = at.A2 > 0.0 ? A * psi_.at_log(std::log(at.A2)) : 0.0;
    const double lower_now = at.A2 > 0.0 ? -A * psi_upper_.at_log(std::log(at.A2)) : 0.0;
    const double p3 = psi_at_tau_ * psi_at_tau_ * psi_at_tau_;
    if (at.n >= 1 && c * p3 > (1.0 + params_.delta) * params_.C * std::sqrt(prev_A2_)) {
      close_cycle(CycleOutcome::AbortedSigma, at, std::nullopt);
      return;
    }
    if (at.S > bound_now) {
      close_cycle(CycleOutcome::SucceededNu, at, std::nullopt);
      return;
    }
    if (at.S < lower_now) {
      close_cycle(CycleOutcome::AbortedRange, at, std::nullopt);
      return;
    }
    if (at.A2 >= schedule_.n(k_ + 1)) {
      close_cycle(CycleOutcome::Advanced, at, at.n);
      start_cycle(k_ + 1, at);
      continue;
    }
    return;
  }
}

bool DynamicStrategy::reentry_ok(const PathStats& at) const {
  double scale = 0.0, u = 0.0;
  if (config_.literal_reentry) {
    const double t = static_cast<double>(at.n);
    scale = std::sqrt(t);
    u = safe_log(t);
  } else {
    scale = at.A();
    u = safe_log(at.A2);
  }
  return -scale * psi_upper_.at_log(u) <= at.S && at.S <= scale * psi_.at_log(u);
}

void DynamicStrategy::start_cycle(std::int64_t k, const PathStats& at) {
  k_ = k;
  cycle_ = std::make_unique<CycleMixture>(k, schedule_, psi_, params_, config_.nodes, at.A2, at.n);
  log_capital_at_start_ = log_capital_;
  psi_at_tau_ = psi_.at_log(safe_log(at.A2));
  phase_ = Phase::Running;
  CycleRecord rec;
  rec.k = k;
  rec.tau_k = at.n;
  rec.W = cycle_->W();
  rec.y_start = cycle_->y_value();
  rec.y_min = rec.y_start;
  rec.end_round = at.n;
  rec.y_end = rec.y_start;
  rec.d_end = cycle_->d_value();
  rec.claim = claimed_growth(k, schedule_, psi_, params_);
  ledger_.push_back(rec);
}

void DynamicStrategy::close_cycle(CycleOutcome o, const PathStats& at,
                                  std::optional<std::int64_t> tau_next) {
  auto& rec = ledger_.back();
  rec.outcome = o;
  rec.end_round = at.n;
  rec.tau_next = tau_next;
  rec.y_end = cycle_->y_value();
  rec.d_end = cycle_->d_value();
  rec.realized_log_factor = cycle_->log_y_ratio();
  if (o != CycleOutcome::Advanced) {
    phase_ = Phase::Waiting;
    next_candidate_ = schedule_.last_reached(at.A2) + 1;
  }
}

std::unique_ptr<MixtureSkeptic> outer_c_mixture(const ClassFunction& psi,
                                                const CycleSchedule& schedule, int C_max,
                                                DynamicConfig base) {
  if (C_max < 1) throw std::invalid_argument("outer_c_mixture: C_max must be >= 1");
  std::vector<std::unique_ptr<Skeptic>> parts;
  std::vector<double> weights;
  double total = 0.0;
  for (int C = 1; C <= C_max; ++C) {
    DynamicConfig cfg = base;
    cfg.C = C;
    parts.push_back(std::make_unique<DynamicStrategy>(psi, schedule, cfg));
    weights.push_back(std::ldexp(1.0, -C));
    total += weights.back();
  }
  const double alpha = BoundParams{}.alpha;
  return std::make_unique<MixtureSkeptic>(std::move(parts), std::move(weights),
                                          alpha * (1.0 - total));
}

// ---------------------------------------------------------------------------

BoundReport timescale_equivalence_check(const ClassFunction& psi, std::int64_t k_lo,
                                        std::int64_t k_hi, double beta) {
  if (k_lo < 2 || k_hi <= k_lo) throw std::domain_error("timescale check: need 2 <= k_lo < k_hi");
  auto psi_at = [&](double x) { return psi.at_log(beta * x * std::log(x)); };
  if (psi_at(static_cast<double>(k_lo)) < 1.0) {
    throw std::domain_error("timescale check: psi < 1 at k_lo");
  }
  auto f = [&](double x) {
    const double p = psi_at(x);
    return p * std::exp(-0.5 * p * p);
  };
  using boost::math::quadrature::gauss_kronrod;
  const double lo = static_cast<double>(k_lo), hi = static_cast<double>(k_hi);
  double err = 0.0;
  const double J = gauss_kronrod<double, 31>::integrate(
      [&](double x) { return std::log(x) * f(x); }, lo, hi, 20, 1e-12, &err);
  double lower = 0.0, upper = 0.0;
  for (std::int64_t k = k_hi; k >= k_lo; --k) {
    const double kd = static_cast<double>(k);
    const double t = std::log(kd) * f(kd);
    if (k > k_lo) lower += 0.5 * t;
    if (k < k_hi) upper += 2.0 * t;
  }
  BoundReport r;
  r.add({0, "timescale_lower", "-", lower, J, false});
  r.add({0, "timescale_upper", "-", J, upper, false});

  const double I = integral_I_log(psi, beta * lo * std::log(lo), beta * hi * std::log(hi), 1e-10).value;
  const double K = beta * gauss_kronrod<double, 31>::integrate(
                              [&](double x) { return (std::log(x) + 1.0) * f(x); }, lo, hi, 20,
                              1e-12, &err);
  r.add({0, "timescale_jacobian", "-", std::abs(I - K), 1e-8 * std::max(std::abs(I), std::abs(K)),
         false});
  return r;
}

std::vector<CycleTrend> unit_path_cycle_trends(const ClassFunction& psi,
                                               const CycleSchedule& schedule, std::int64_t k_lo,
                                               std::int64_t k_hi) {
  std::vector<CycleTrend> out;
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    const double ln_k = schedule.log_n(k), ln_k1 = schedule.log_n(k + 1);
    const double p_next = psi.at_log(ln_k1);
    const double kd = static_cast<double>(k);
    CycleTrend t;
    t.k = k;
    t.psi_ratio = psi_upper_log(ln_k) / p_next;
    t.scaled_A2 = std::exp(5.0 * std::log(kd) + ln_k - ln_k1);
    t.gamma_term = p_next * p_next * kd * kd * std::exp(0.5 * (ln_k - ln_k1));
    out.push_back(t);
  }
  return out;
}

}  // namespace efkp
