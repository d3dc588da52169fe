#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace efkp {

/// ln applied k times. Throws std::domain_error if any intermediate is <= 0.
double iter_log(int k, double n);

/// sqrt(2 ln_2 n + 3 ln_3 n). Throws std::domain_error outside its domain.
double psi_lower(double n);
/// sqrt(2 ln_2 n + 4 ln_3 n). Throws std::domain_error outside its domain.
double psi_upper(double n);

// Same functions of u = ln n, usable far beyond the double range of n.
double psi_lower_log(double u);
double psi_upper_log(double u);

inline constexpr double kDefaultClipThreshold = 16.0;

/// A positive non-decreasing boundary function psi(lambda).
///
/// Stored as a function of u = ln(lambda) so that schedule values such as
/// k^{5k} can be evaluated without overflow.
class ClassFunction {
 public:
  enum class Kind { BuiltinUpper, BuiltinLower, User, ClippedUser };

  static ClassFunction builtin_upper();
  static ClassFunction builtin_lower();
  static ClassFunction constant(double value);
  /// Wraps an arbitrary function of lambda.
  static ClassFunction user(std::string name, std::function<double(double)> of_lambda);
  /// Wraps an arbitrary function of u = ln(lambda).
  static ClassFunction user_log(std::string name, std::function<double(double)> of_log);
  /// Tabulated (lambda, psi) grid, linear in psi against ln(lambda), flat
  /// outside the grid. Grid must be increasing in lambda and non-decreasing
  /// in psi.
  static ClassFunction tabulated(std::vector<double> lambda, std::vector<double> psi);
  static ClassFunction from_csv(std::istream& in);
  /// Builtin by name ("upper", "lower", "constant:<v>") or a CSV file path.
  static ClassFunction by_name(const std::string& name_or_path);

  /// Pointwise clamp into [psi_L, psi_U] above `threshold`, with the value at
  /// the threshold extended to the left. The result is defined for all
  /// lambda > 0.
  ClassFunction clipped(double threshold = kDefaultClipThreshold) const;

  double operator()(double lambda) const;
  double at_log(double u) const { return of_log_(u); }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double clip_threshold() const { return threshold_; }

  /// Spot-checks monotonicity and positivity on `points` log-spaced samples of
  /// [lo, hi]. Returns false on the first failure.
  bool check_monotone(double lo, double hi, int points = 1000) const;

 private:
  ClassFunction(Kind kind, std::string name, std::function<double(double)> of_log,
                double threshold = 0.0);

  Kind kind_;
  std::string name_;
  std::function<double(double)> of_log_;
  double threshold_;
};

/// Raised when adaptive quadrature fails to meet its tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Integral of psi(l) exp(-psi(l)^2/2) dl/l over [lo, hi], computed in the
/// variable u = ln l. Throws QuadratureError if the tolerance is not met.
QuadratureResult integral_I(const ClassFunction& psi, double lo, double hi,
                            double rel_tol = 1e-10);
/// Same over u in [u_lo, u_hi].
QuadratureResult integral_I_log(const ClassFunction& psi, double u_lo, double u_hi,
                                double rel_tol = 1e-10);

/// The summand psi(k) exp(-psi(k)^2/2) / k.
double criterion_term(const ClassFunction& psi, double k);

/// sum_{k=k_lo}^{k_hi} psi(k) exp(-psi(k)^2/2) / k.
double sum_criterion(const ClassFunction& psi, std::int64_t k_lo, std::int64_t k_hi);

/// Weights of the countable mixture: p_k = a_k term_k / Z for k = 1..k_max.
struct MixtureWeights {
  std::vector<double> a;     // a[k-1]
  std::vector<double> term;  // term[k-1]
  std::vector<double> p;     // p[k-1]
  double Z = 0.0;

  std::int64_t k_max() const { return static_cast<std::int64_t>(p.size()); }
};

/// Block weights from the tail sums: a_k = j when the remaining mass
/// R_k = sum_{m>=k} term_m (plus `tail_mass` beyond the last term) lies in
/// (2^{-j}, 2^{-j+1}]; a_k = 1 when R_k > 1. Throws std::domain_error on a
/// non-finite or negative term or tail.
MixtureWeights blocking_weights_from_terms(std::vector<double> terms,
                                           double tail_mass = 0.0);

/// Blocking weights for the criterion series of `psi` over k = 1..k_max.
MixtureWeights build_blocking_weights(const ClassFunction& psi, std::int64_t k_max,
                                      double tail_mass = 0.0);

/// User override: weights from a caller-chosen non-decreasing a_k.
MixtureWeights weights_from_sequence(const ClassFunction& psi, std::vector<double> a);

}  // namespace efkp
