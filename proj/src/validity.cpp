#include "efkp/validity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace efkp {

ValidityMixture::ValidityMixture(ClassFunction psi, MixtureWeights weights, std::int64_t k_max,
                                 double delta)
    : psi_(std::move(psi)), weights_(std::move(weights)), k_max_(k_max), delta_(delta) {
  if (k_max < 1) throw std::invalid_argument("ValidityMixture: k_max must be >= 1");
  if (weights_.k_max() < k_max) {
    throw std::invalid_argument("ValidityMixture: weights cover fewer than k_max accounts");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ValidityMixture: delta in (0,1)");
  const auto n = static_cast<std::size_t>(k_max);
  gamma_.resize(n);
  log_p_.resize(n);
  growth_.assign(n, 0.0);
  freeze_round_.assign(n, -1);
  open_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    gamma_[i] = psi_(k) / std::sqrt(k);
    const double p = weights_.p[i];
    log_p_[i] = p > 0.0 ? std::log(p) : kNegInf;
    open_.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t i = weights_.p.size(); i-- > n;) cash_ += weights_.p[i];
  log_cash_ = cash_ > 0.0 ? std::log(cash_) : kNegInf;
}

ValidityMixture ValidityMixture::with_blocking(const ClassFunction& psi, std::int64_t k_max,
                                               std::int64_t k_weights, double delta) {
  const std::int64_t kw = std::max(k_max, k_weights);
  return ValidityMixture(psi, build_blocking_weights(psi, kw), k_max, delta);
}

double ValidityMixture::bet_fraction(const PathStats& before, double c) {
  const std::int64_t round = before.n + 1;
  // Freeze pass.
  for (std::size_t j = 0; j < open_.size();) {
    const std::uint32_t i = open_[j];
    if (gamma_[i] * c > delta_) {
      freeze_round_[i] = round;
      log_frozen_ = log_add_exp(log_frozen_, log_p_[i] + growth_[i]);
      open_[j] = open_.back();
      open_.pop_back();
    } else {
      ++j;
    }
  }
  if (open_.empty()) return 0.0;
  double m = std::max(log_frozen_, log_cash_);
  for (std::uint32_t i : open_) m = std::max(m, log_p_[i] + growth_[i]);
  if (m == kNegInf) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::uint32_t i : open_) {
    const double v = std::exp(log_p_[i] + growth_[i] - m);
    num += gamma_[i] * v;
    den += v;
  }
  den += std::exp(log_frozen_ - m) + std::exp(log_cash_ - m);
  return num / den;
}

void ValidityMixture::observe(const PathStats&, const PathEvent& e) {
  ++round_;
  if (e.x == 0.0) return;
  for (std::uint32_t i : open_) growth_[i] += std::log1p(gamma_[i] * e.x);
}

double ValidityMixture::log_capital() const {
  std::vector<double> t;
  t.reserve(open_.size() + 2);
  for (std::uint32_t i : open_) t.push_back(log_p_[i] + growth_[i]);
  t.push_back(log_frozen_);
  t.push_back(log_cash_);
  return log_sum_exp(t);
}

double ValidityMixture::account_log_value(std::int64_t k) const { return growth_[idx(k)]; }

std::string ValidityMixture::name() const {
  return "validity:psi=" + psi_.name() + ",kmax=" + std::to_string(k_max_);
}

// ---------------------------------------------------------------------------

ValidityCertificate validity_certificate(const ValidityMixture& m, const PathStats& st,
                                         const BoundParams& params) {
  ValidityCertificate out;
  const double A2 = st.A2;
  if (!(A2 > 0.0)) {
    out.reason = "A^2 = 0";
    return out;
  }
  const double A = std::sqrt(A2);
  const double ps = m.psi()(A2);
  if (!(st.S >= A * ps)) {
    out.reason = "not a hitting round";
    return out;
  }
  const double delta = params.delta, C = params.C;
  const auto k_lo = static_cast<std::int64_t>(std::floor(A2 - A2 / ps));
  const auto k_hi = static_cast<std::int64_t>(std::floor(A2));
  out.k_lo = k_lo;
  out.k_hi = k_hi;
  if (k_lo < 1) {
    out.reason = "window starts below k = 1";
    return out;
  }
  if (k_hi > m.k_max()) {
    out.reason = "window exceeds k_max";
    return out;
  }
  out.applicable = true;
  const std::int64_t n = st.n;

  double min_exponent = std::numeric_limits<double>::infinity();
  double max_remainder = 0.0;
  double max_open = 0.0;
  bool any_frozen = false;
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    const double g = m.gamma(k);
    const double pk = m.psi()(static_cast<double>(k));
    min_exponent = std::min(min_exponent, -0.5 * pk * pk + g * st.S - 0.5 * g * g * A2);
    max_remainder = std::max(max_remainder, g * g * g * A2 * st.cbar);
    max_open = std::max(max_open, g * st.cbar);
    any_frozen = any_frozen || m.frozen(k);
  }
  auto& r = out.report;
  r.add({n, "validity_exponent", "-", -0.5 - 2.0 * delta, min_exponent, true});
  r.add({n, "validity_remainder", "-", max_remainder, C * std::pow(1.0 + delta, 4), false});
  r.add({n, "validity_psi_ratio", "-", ps, 2.0 * m.psi()(static_cast<double>(k_lo)), false});
  r.add({n, "validity_cbar", "-", st.cbar, (1.0 + delta) * C * A / (ps * ps * ps), false});
  r.add({n, "validity_open", any_frozen ? "frozen" : "-",
         any_frozen ? std::numeric_limits<double>::infinity() : max_open, delta, false});

  const double half_gap = 0.5 - ps / (2.0 * A2);
  out.log_lower_bound = half_gap > 0.0
                            ? std::log(m.a(k_lo)) + std::log(half_gap) - 0.5 - 2.0 * delta -
                                  C * std::pow(1.0 + delta, 4)
                            : kNegInf;
  out.log_ZK = std::log(m.weights().Z) + m.log_capital();
  r.add({n, "validity_lower", "-", out.log_lower_bound, out.log_ZK, true});
  return out;
}

// ---------------------------------------------------------------------------

ValidityTwoPoint::ValidityTwoPoint(const ValidityMixture& m, double c) {
  if (!(c >= 0.0)) throw std::invalid_argument("ValidityTwoPoint: c must be >= 0");
  std::vector<double> fixed{m.cash() > 0.0 ? std::log(m.cash()) : kNegInf};
  for (std::int64_t k = 1; k <= m.k_max(); ++k) {
    const double g = m.gamma(k);
    const double lp = m.p(k) > 0.0 ? std::log(m.p(k)) : kNegInf;
    if (g * c > m.delta()) {
      fixed.push_back(lp);
    } else {
      log_p_.push_back(lp);
      log_up_.push_back(std::log1p(g * c));
      log_down_.push_back(std::log1p(-g * c));
    }
  }
  log_fixed_ = log_sum_exp(fixed);
}

double ValidityTwoPoint::log_capital(std::int64_t heads, std::int64_t tails) const {
  std::vector<double> t(log_p_.size() + 1);
  const double h = static_cast<double>(heads), tl = static_cast<double>(tails);
  for (std::size_t i = 0; i < log_p_.size(); ++i) {
    t[i] = log_p_[i] + h * log_up_[i] + tl * log_down_[i];
  }
  t.back() = log_fixed_;
  return log_sum_exp(t);
}

}  // namespace efkp
