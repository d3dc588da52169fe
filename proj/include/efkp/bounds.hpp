#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace efkp {

inline constexpr double kDefaultBoundTolerance = 1e-9;

/// One evaluated inequality lhs <= rhs at a given round.
///
/// When `log_scale` is set both sides are natural logarithms of the compared
/// quantities and the relative tolerance becomes an absolute one in log space.
struct BoundRecord {
  std::int64_t round = 0;
  std::string bound_id;
  std::string case_id;
  double lhs = 0.0;
  double rhs = 0.0;
  bool log_scale = false;

  double slack() const { return rhs - lhs; }
  bool violated(double tol = kDefaultBoundTolerance) const;
};

struct BoundStats {
  std::int64_t evaluated = 0;
  std::int64_t violations = 0;
  double worst_slack = 0.0;  // smallest rhs - lhs seen
};

class BoundReport {
 public:
  void add(BoundRecord r);
  void append(const BoundReport& other);

  const std::vector<BoundRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::int64_t violations(double tol = kDefaultBoundTolerance) const;
  /// Per-bound_id totals.
  std::map<std::string, BoundStats> summarize(double tol = kDefaultBoundTolerance) const;

  /// Keep only totals, dropping individual records (long sweeps).
  void set_keep_records(bool keep) { keep_ = keep; }

 private:
  std::vector<BoundRecord> records_;
  std::map<std::string, BoundStats> running_;
  bool keep_ = true;
  friend void write_bound_csv(std::ostream&, const BoundReport&);
};

/// CSV columns: round,bound_id,case_id,lhs,rhs,slack,violated.
void write_bound_csv(std::ostream& out, const BoundReport& report);

/// Constants shared by the sharpness bounds.
///
/// D and the case-(i) constant bar C_1 are far outside the double range for
/// any C >= 1, so they are stored as logarithms.
struct BoundParams {
  double delta = 0.01;
  double C = 1.0;
  double alpha = 1.0 - 2.0 / 2.718281828459045235360287;
  double c1 = 0.0;         // 9 / (1 + 2 delta)^2
  double log_C1bar = 0.0;  // ln bar C_1
  double log_D = 0.0;      // ln D

  /// Fills c1, log_C1bar and log_D from delta, C and alpha.
  static BoundParams make(double C, double delta = 0.01);

  /// (1 + delta)^5 e^6 C, the bound on gamma^3 A^2 cbar for open cycle accounts.
  double remainder_bound() const;
  /// Replace D (any sufficiently large D is admissible).
  BoundParams with_log_D(double log_D) const;
};

/// C_1 of the buy/sell bound as a function of gamma^3 A^2 cbar, in log form.
double log_C1(double remainder);

}  // namespace efkp
