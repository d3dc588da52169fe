#include "efkp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "efkp/numeric.hpp"

namespace efkp {

bool BoundRecord::violated(double tol) const {
  if (std::isnan(lhs) || std::isnan(rhs)) return true;
  if (lhs <= rhs) return false;
  if (log_scale) return lhs - rhs > tol;
  return lhs - rhs > tol * std::max(std::abs(lhs), std::abs(rhs));
}

void BoundReport::add(BoundRecord r) {
  auto& s = running_[r.bound_id];
  const double sl = r.slack();
  if (s.evaluated == 0 || sl < s.worst_slack || std::isnan(sl)) s.worst_slack = sl;
  ++s.evaluated;
  if (r.violated()) ++s.violations;
  if (keep_) records_.push_back(std::move(r));
}

void BoundReport::append(const BoundReport& other) {
  for (const auto& [id, st] : other.running_) {
    auto& s = running_[id];
    if (s.evaluated == 0 || st.worst_slack < s.worst_slack) s.worst_slack = st.worst_slack;
    s.evaluated += st.evaluated;
    s.violations += st.violations;
  }
  if (keep_) records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

std::int64_t BoundReport::violations(double tol) const {
  if (tol == kDefaultBoundTolerance || records_.empty()) {
    std::int64_t v = 0;
    for (const auto& [id, s] : running_) v += s.violations;
    return v;
  }
  return std::count_if(records_.begin(), records_.end(),
                       [tol](const BoundRecord& r) { return r.violated(tol); });
}

std::map<std::string, BoundStats> BoundReport::summarize(double tol) const {
  if (tol == kDefaultBoundTolerance || records_.empty()) return running_;
  std::map<std::string, BoundStats> out;
  for (const auto& r : records_) {
    auto& s = out[r.bound_id];
    if (s.evaluated == 0 || r.slack() < s.worst_slack) s.worst_slack = r.slack();
    ++s.evaluated;
    if (r.violated(tol)) ++s.violations;
  }
  return out;
}

void write_bound_csv(std::ostream& out, const BoundReport& report) {
  out << "round,bound_id,case_id,lhs,rhs,slack,violated\n";
  for (const auto& r : report.records_) {
    out << r.round << ',' << r.bound_id << ',' << r.case_id << ',' << fmt17(r.lhs) << ','
        << fmt17(r.rhs) << ',' << fmt17(r.slack()) << ',' << (r.violated() ? 1 : 0) << '\n';
  }
}

double log_C1(double remainder) {
  const double e = kE;
  return std::log(2.0) + remainder +
         (2.0 * e - 1.0) * ((1.0 + e * e * e) * remainder + std::log(2.0)) / ((e - 1.0) * (e - 1.0));
}

BoundParams BoundParams::make(double C, double delta) {
  BoundParams p;
  p.delta = delta;
  p.C = C;
  p.c1 = 9.0 / ((1.0 + 2.0 * delta) * (1.0 + 2.0 * delta));
  const double E = p.remainder_bound();
  p.log_C1bar = log_C1(E);
  const double log_gauss_part = std::log(24.0 * std::sqrt(2.0 * M_PI)) + E;
  const double log_c1_part = std::log(4.0) + p.log_C1bar;
  p.log_D = log_add_exp(log_gauss_part, log_c1_part) - std::log(p.alpha);
  return p;
}

double BoundParams::remainder_bound() const {
  return std::pow(1.0 + delta, 5) * std::exp(6.0) * C;
}

BoundParams BoundParams::with_log_D(double v) const {
  BoundParams p = *this;
  p.log_D = v;
  return p;
}

}  // namespace efkp
