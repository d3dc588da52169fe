#include "efkp/class_functions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "efkp/numeric.hpp"

namespace efkp {

double iter_log(int k, double n) {
  if (k < 1) throw std::domain_error("iter_log: k must be >= 1");
  double v = n;
  for (int i = 0; i < k; ++i) {
    if (!(v > 0.0)) {
      throw std::domain_error("iter_log: argument " + fmt17(v) + " <= 0 at step " +
                              std::to_string(i + 1));
    }
    v = std::log(v);
  }
  return v;
}

namespace {

double psi_log_impl(double u, double coef, const char* what) {
  if (!(u > 1.0)) {
    throw std::domain_error(std::string(what) + ": ln_3 undefined at ln n = " + fmt17(u));
  }
  const double l2 = std::log(u);
  const double r = 2.0 * l2 + coef * std::log(l2);
  if (!(r > 0.0)) {
    throw std::domain_error(std::string(what) + ": radicand " + fmt17(r) + " <= 0");
  }
  return std::sqrt(r);
}

double log_of(double n, const char* what) {
  if (!(n > 0.0)) throw std::domain_error(std::string(what) + ": n <= 0");
  return std::log(n);
}

}  // namespace

double psi_lower_log(double u) { return psi_log_impl(u, 3.0, "psi_lower"); }
double psi_upper_log(double u) { return psi_log_impl(u, 4.0, "psi_upper"); }
double psi_lower(double n) { return psi_lower_log(log_of(n, "psi_lower")); }
double psi_upper(double n) { return psi_upper_log(log_of(n, "psi_upper")); }

ClassFunction::ClassFunction(Kind kind, std::string name,
                             std::function<double(double)> of_log, double threshold)
    : kind_(kind), name_(std::move(name)), of_log_(std::move(of_log)), threshold_(threshold) {}

ClassFunction ClassFunction::builtin_upper() {
  return {Kind::BuiltinUpper, "upper", psi_upper_log};
}

ClassFunction ClassFunction::builtin_lower() {
  return {Kind::BuiltinLower, "lower", psi_lower_log};
}

ClassFunction ClassFunction::constant(double value) {
  if (!(value > 0.0)) throw std::invalid_argument("constant psi must be positive");
  return {Kind::User, "const:" + fmt17(value), [value](double) { return value; }};
}

ClassFunction ClassFunction::user(std::string name, std::function<double(double)> of_lambda) {
  return {Kind::User, std::move(name),
          [f = std::move(of_lambda)](double u) { return f(std::exp(u)); }};
}

ClassFunction ClassFunction::user_log(std::string name, std::function<double(double)> of_log) {
  return {Kind::User, std::move(name), std::move(of_log)};
}

ClassFunction ClassFunction::tabulated(std::vector<double> lambda, std::vector<double> psi) {
  if (lambda.size() != psi.size() || lambda.empty()) {
    throw std::invalid_argument("tabulated psi: need matching non-empty columns");
  }
  std::vector<double> u(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] > 0.0) || !(psi[i] > 0.0)) {
      throw std::invalid_argument("tabulated psi: lambda and psi must be positive");
    }
    if (i > 0 && (!(lambda[i] > lambda[i - 1]) || psi[i] < psi[i - 1])) {
      throw std::invalid_argument("tabulated psi: grid must be increasing and monotone");
    }
    u[i] = std::log(lambda[i]);
  }
  auto f = [u = std::move(u), psi = std::move(psi)](double x) {
    if (x <= u.front()) return psi.front();
    if (x >= u.back()) return psi.back();
    const auto it = std::upper_bound(u.begin(), u.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - u.begin());
    const double t = (x - u[j - 1]) / (u[j] - u[j - 1]);
    return psi[j - 1] + t * (psi[j] - psi[j - 1]);
  };
  return {Kind::User, "tabulated", std::move(f)};
}

ClassFunction ClassFunction::from_csv(std::istream& in) {
  std::vector<double> lam, psi;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a = 0.0, b = 0.0;
    if (!(ss >> a >> b)) {
      if (lam.empty()) continue;  // header
      throw std::invalid_argument("psi csv: malformed line '" + line + "'");
    }
    lam.push_back(a);
    psi.push_back(b);
  }
  return tabulated(std::move(lam), std::move(psi));
}

ClassFunction ClassFunction::by_name(const std::string& name_or_path) {
  if (name_or_path == "upper") return builtin_upper();
  if (name_or_path == "lower") return builtin_lower();
  if (name_or_path.rfind("constant:", 0) == 0) return constant(std::stod(name_or_path.substr(9)));
  std::ifstream in(name_or_path);
  if (!in) throw std::invalid_argument("psi: unknown builtin or unreadable file '" + name_or_path + "'");
  ClassFunction f = from_csv(in);
  f.name_ = name_or_path;
  return f;
}

ClassFunction ClassFunction::clipped(double threshold) const {
  if (!(threshold > std::exp(1.0))) {
    throw std::invalid_argument("clip threshold must exceed e");
  }
  const double u0 = std::log(threshold);
  // Radicand of psi_L must be positive at the threshold.
  psi_lower_log(u0);
  auto base = of_log_;
  auto f = [base, u0](double u) {
    const double v = std::max(u, u0);
    return std::clamp(base(v), psi_lower_log(v), psi_upper_log(v));
  };
  std::string nm = name_ + "|clipped@" + fmt17(threshold);
  return {Kind::ClippedUser, std::move(nm), std::move(f), threshold};
}

double ClassFunction::operator()(double lambda) const {
  if (!(lambda > 0.0)) throw std::domain_error("psi: lambda must be positive");
  return of_log_(std::log(lambda));
}

bool ClassFunction::check_monotone(double lo, double hi, int points) const {
  const double ulo = std::log(lo), uhi = std::log(hi);
  double prev = 0.0;
  for (int i = 0; i < points; ++i) {
    const double u = points == 1 ? ulo : ulo + (uhi - ulo) * i / (points - 1);
    const double v = of_log_(u);
    if (!(v > 0.0) || (i > 0 && v < prev)) return false;
    prev = v;
  }
  return true;
}

QuadratureResult integral_I_log(const ClassFunction& psi, double u_lo, double u_hi,
                                double rel_tol) {
  if (!(u_hi > u_lo)) throw std::invalid_argument("integral_I: need lo < hi");
  auto g = [&psi](double u) {
    const double p = psi.at_log(u);
    return p * std::exp(-0.5 * p * p);
  };
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double v = gauss_kronrod<double, 31>::integrate(g, u_lo, u_hi, 20, rel_tol, &err);
  if (!std::isfinite(v) || err > rel_tol * std::abs(v) + 1e-300) {
    throw QuadratureError("integral_I: error estimate " + fmt17(err) + " exceeds tolerance for value " +
                          fmt17(v));
  }
  return {v, err};
}

QuadratureResult integral_I(const ClassFunction& psi, double lo, double hi, double rel_tol) {
  if (!(lo >= 1.0) || !(hi > lo)) throw std::invalid_argument("integral_I: need 1 <= lo < hi");
  return integral_I_log(psi, std::log(lo), std::log(hi), rel_tol);
}

double criterion_term(const ClassFunction& psi, double k) {
  const double p = psi(k);
  return p * std::exp(-0.5 * p * p) / k;
}

double sum_criterion(const ClassFunction& psi, std::int64_t k_lo, std::int64_t k_hi) {
  if (k_lo < 1) throw std::invalid_argument("sum_criterion: k_lo must be >= 1");
  double s = 0.0;
  // Smallest terms first.
  for (std::int64_t k = k_hi; k >= k_lo; --k) s += criterion_term(psi, static_cast<double>(k));
  return s;
}

MixtureWeights blocking_weights_from_terms(std::vector<double> terms, double tail_mass) {
  if (!std::isfinite(tail_mass) || tail_mass < 0.0) {
    throw std::domain_error("blocking weights: tail mass must be finite and >= 0");
  }
  const std::size_t n = terms.size();
  MixtureWeights w;
  w.a.resize(n);
  w.p.resize(n);
  double tail = tail_mass;
  for (std::size_t i = n; i-- > 0;) {
    const double t = terms[i];
    if (!std::isfinite(t) || t < 0.0) {
      throw std::domain_error("blocking weights: term " + std::to_string(i + 1) +
                              " is not a finite non-negative number");
    }
    tail += t;
    if (!std::isfinite(tail)) throw std::domain_error("blocking weights: partial sums diverge");
    // R in (2^{-j}, 2^{-j+1}]  <=>  j = floor(-log2 R) + 1.
    const double j = tail > 0.0 ? std::floor(-std::log2(tail)) + 1.0 : 1.0;
    w.a[i] = std::max(1.0, j);
  }
  // Tail sums are non-increasing, so a_k is already monotone up to rounding.
  for (std::size_t i = 1; i < n; ++i) w.a[i] = std::max(w.a[i], w.a[i - 1]);
  double z = 0.0;
  for (std::size_t i = n; i-- > 0;) z += w.a[i] * terms[i];
  if (!(z > 0.0)) throw std::domain_error("blocking weights: series has no mass");
  for (std::size_t i = 0; i < n; ++i) w.p[i] = w.a[i] * terms[i] / z;
  w.Z = z;
  w.term = std::move(terms);
  return w;
}

MixtureWeights build_blocking_weights(const ClassFunction& psi, std::int64_t k_max,
                                      double tail_mass) {
  if (k_max < 1) throw std::invalid_argument("build_blocking_weights: k_max must be >= 1");
  std::vector<double> terms(static_cast<std::size_t>(k_max));
  for (std::int64_t k = 1; k <= k_max; ++k) {
    terms[static_cast<std::size_t>(k - 1)] = criterion_term(psi, static_cast<double>(k));
  }
  return blocking_weights_from_terms(std::move(terms), tail_mass);
}

MixtureWeights weights_from_sequence(const ClassFunction& psi, std::vector<double> a) {
  MixtureWeights w;
  const std::size_t n = a.size();
  w.term.resize(n);
  w.p.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] > 0.0) || (i > 0 && a[i] < a[i - 1])) {
      throw std::invalid_argument("a_k must be positive and non-decreasing");
    }
    w.term[i] = criterion_term(psi, static_cast<double>(i + 1));
  }
  for (std::size_t i = n; i-- > 0;) z += a[i] * w.term[i];
  for (std::size_t i = 0; i < n; ++i) w.p[i] = a[i] * w.term[i] / z;
  w.Z = z;
  w.a = std::move(a);
  return w;
}

}  // namespace efkp
