#include "efkp/accounts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "efkp/numeric.hpp"

namespace efkp {

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule r;
  r.nodes.resize(static_cast<std::size_t>(n));
  r.weights.resize(static_cast<std::size_t>(n));
  const double mid = 0.5 * (hi + lo), half = 0.5 * (hi - lo);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const std::size_t j = static_cast<std::size_t>(n - 1 - i);  // ascending order
    r.nodes[j] = mid + half * x;
    r.weights[j] = half * 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// ---------------------------------------------------------------------------

Account::Account(double gamma, double delta, double alpha)
    : gamma_(gamma), delta_(delta), alpha_(alpha) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("Account: gamma must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("Account: delta must be in (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("Account: alpha must be > 0");
}

double Account::log_value() const { return std::log(alpha_) + log_growth_; }
double Account::value() const { return alpha_ * std::exp(log_growth_); }

double Account::bet(double c, std::int64_t round) {
  if (frozen_) return 0.0;
  if (gamma_ * c > delta_) {
    frozen_ = true;
    freeze_round_ = round;
    return 0.0;
  }
  return gamma_ * value();
}

void Account::update(double x) {
  if (!frozen_) log_growth_ += std::log1p(gamma_ * x);
}

BoundReport cp_bound_check(const Account& account, const PathStats& st) {
  const double g = account.gamma();
  if (account.frozen()) throw std::logic_error("cp_bound_check: account is frozen");
  if (g * st.cbar > account.delta()) {
    throw std::logic_error("cp_bound_check: gamma * cbar exceeds delta");
  }
  const double centre = g * st.S - 0.5 * g * g * st.A2;
  const double rem = g * g * g * st.A2 * st.cbar;
  BoundReport r;
  r.add({st.n, "cp_lower", "-", centre - rem, account.log_growth(), true});
  r.add({st.n, "cp_upper", "-", account.log_growth(), centre + rem, true});
  return r;
}

// ---------------------------------------------------------------------------

UniformMixtureAccount::UniformMixtureAccount(double gamma, double delta, int nodes,
                                             bool exact_poly)
    : gamma_(gamma),
      delta_(delta),
      rule_(gauss_legendre(nodes, kMixtureLower, 1.0)),
      log_nodes_(static_cast<std::size_t>(nodes), 0.0),
      exact_(exact_poly) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("UniformMixtureAccount: gamma must be >= 0");
  if (exact_) coef_ = {1.0};
}

double UniformMixtureAccount::value() const {
  double v = 0.0;
  for (std::size_t j = 0; j < log_nodes_.size(); ++j) v += rule_.weights[j] * std::exp(log_nodes_[j]);
  return v;
}

double UniformMixtureAccount::log_value() const {
  std::vector<double> t(log_nodes_.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = std::log(rule_.weights[j]) + log_nodes_[j];
  return log_sum_exp(t);
}

double UniformMixtureAccount::bet(double c, std::int64_t round) {
  if (frozen_) return 0.0;
  if (gamma_ * c > delta_) {
    freeze(round);
    return 0.0;
  }
  double m = 0.0;
  for (std::size_t j = 0; j < log_nodes_.size(); ++j) {
    m += rule_.weights[j] * rule_.nodes[j] * gamma_ * std::exp(log_nodes_[j]);
  }
  return m;
}

void UniformMixtureAccount::update(double x) {
  if (frozen_) return;
  ++rounds_;
  for (std::size_t j = 0; j < log_nodes_.size(); ++j) {
    log_nodes_[j] += std::log1p(rule_.nodes[j] * gamma_ * x);
  }
  if (exact_) {
    const double gx = gamma_ * x;
    coef_.push_back(0.0);
    for (std::size_t m = coef_.size() - 1; m > 0; --m) coef_[m] += gx * coef_[m - 1];
  }
}

void UniformMixtureAccount::freeze(std::int64_t round) {
  if (frozen_) return;
  frozen_ = true;
  freeze_round_ = round;
}

double UniformMixtureAccount::exact_value() const {
  if (!exact_) throw std::logic_error("exact_value requires exact_poly mode");
  // integral of u^m over [2/e, 1] = (1 - (2/e)^{m+1}) / (m+1)
  double v = 0.0;
  double lo_pow = kMixtureLower;
  for (std::size_t m = 0; m < coef_.size(); ++m) {
    v += coef_[m] * (1.0 - lo_pow) / static_cast<double>(m + 1);
    lo_pow *= kMixtureLower;
  }
  return v;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_gauss_bound(double S, double A2, double g) {
  if (!(A2 > 0.0) || !(g > 0.0)) return std::numeric_limits<double>::infinity();
  return S * S / (2.0 * A2) + kHalfLog2Pi - std::log(g * std::sqrt(A2));
}

double band(double S, double scale) { return 1e-12 * std::max(std::abs(S), std::abs(scale)); }

}  // namespace

BoundReport q_upper_bounds(const UniformMixtureAccount& q, const PathStats& st) {
  if (q.frozen()) throw std::logic_error("q_upper_bounds: account is frozen");
  const double g = q.gamma();
  const double S = st.S, A2 = st.A2;
  const double rem = g * g * g * A2 * st.cbar;
  const double lq = q.log_value();
  const double b1 = 2.0 * g * A2 / kE, b2 = g * A2;
  const double eps = band(S, b2);
  const double gauss = log_gauss_bound(S, A2, g);

  BoundReport r;
  if (S <= b1 + eps) {
    r.add({st.n, "q_mcps", "1", lq, rem + 2.0 * g * (S / kE - g * A2 / (kE * kE)), true});
  }
  if (S > b1 - eps && S < b2 + eps) {
    r.add({st.n, "q_mcps", "2", lq, rem + std::min(gauss, 0.5 * g * S), true});
  }
  if (S >= b2 - eps) {
    r.add({st.n, "q_mcps", "3", lq, rem + std::min(gauss, g * S - 0.5 * g * g * A2), true});
  }
  if (std::isfinite(gauss)) r.add({st.n, "q_gauss", "-", lq, rem + gauss, true});
  return r;
}

// ---------------------------------------------------------------------------

BuySellAccount::BuySellAccount(double gamma, double delta, int nodes)
    : q_(gamma, delta, nodes), sold_(gamma * kE, delta, kMixtureAlpha), delta_(delta) {}

double BuySellAccount::value() const { return 2.0 * q_.value() - sold_.value(); }

double BuySellAccount::bet(double c, std::int64_t round) {
  if (frozen_) return 0.0;
  if (sold_.gamma() * c > delta_) {
    freeze(round);
    return 0.0;
  }
  return 2.0 * q_.bet(c, round) - sold_.bet(c, round);
}

void BuySellAccount::update(double x) {
  if (frozen_) return;
  q_.update(x);
  sold_.update(x);
}

void BuySellAccount::freeze(std::int64_t round) {
  if (frozen_) return;
  frozen_ = true;
  freeze_round_ = round;
  q_.freeze(round);
  // The sold leg freezes through its own rule when gamma e c > delta; a
  // forced close is recorded by pinning its bet at zero from here on.
  sold_.bet(std::numeric_limits<double>::infinity(), round);
}

BoundReport t_bounds(const BuySellAccount& t, const PathStats& st) {
  if (t.frozen()) throw std::logic_error("t_bounds: account is frozen");
  const double g = t.gamma();
  const double S = st.S, A2 = st.A2;
  const double rem = g * g * g * A2 * st.cbar;
  const double tv = t.value();
  const double lt = tv > 0.0 ? std::log(tv) : kNegInf;
  const double lc1 = log_C1(rem);
  const double b1 = g * A2 / kE, b2 = kE * g * A2;
  const double eps = band(S, b2);
  const double gauss = log_gauss_bound(S, A2, g);

  BoundReport r;
  if (S <= b1 + eps) r.add({st.n, "t_bss", "i", lt, lc1, true});
  if (S > b1 - eps && S < b2 + eps) {
    r.add({st.n, "t_bss", "ii", lt, std::log(2.0) + rem + std::min(gauss, g * S), true});
  }
  if (S >= b2 - eps) r.add({st.n, "t_bss", "iii", lt, lc1, true});
  return r;
}

// ---------------------------------------------------------------------------

ConstantProportionSkeptic::ConstantProportionSkeptic(double gamma, double delta, double alpha)
    : account_(gamma, delta, alpha) {}

double ConstantProportionSkeptic::bet_fraction(const PathStats& before, double c) {
  const double m = account_.bet(c, before.n + 1);
  return m == 0.0 ? 0.0 : account_.gamma();
}

void ConstantProportionSkeptic::observe(const PathStats&, const PathEvent& e) {
  account_.update(e.x);
}

std::string ConstantProportionSkeptic::name() const {
  return "cp:gamma=" + fmt17(account_.gamma());
}

UniformMixtureSkeptic::UniformMixtureSkeptic(double gamma, double delta, int nodes)
    : q_(gamma, delta, nodes) {}

double UniformMixtureSkeptic::bet_fraction(const PathStats& before, double c) {
  const double m = q_.bet(c, before.n + 1);
  return m == 0.0 ? 0.0 : m / q_.value();
}

void UniformMixtureSkeptic::observe(const PathStats&, const PathEvent& e) { q_.update(e.x); }

std::string UniformMixtureSkeptic::name() const { return "q:gamma=" + fmt17(q_.gamma()); }

}  // namespace efkp
