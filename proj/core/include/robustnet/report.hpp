#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robustnet/data.hpp"
#include "robustnet/objectives.hpp"

namespace robustnet {

/// One result row; NaN marks a column this run did not produce. Attack
/// accuracies are keyed by a free-form attack label (e.g. "pgd_l1").
struct ReportRow {
  std::string method;
  double rho = 0.0;
  double clean_accuracy;
  std::map<std::string, double> adversarial;
  double certified_accuracy;
  double samples_per_second;
  ReportRow();
};

/// Accuracy table keyed by (method, rho), rows kept sorted by method then
/// ascending rho. CSV and JSON serializations round-trip through the
/// corresponding parser.
class ReportTable {
 public:
  ReportRow& row(const std::string& method, double rho);
  const ReportRow* find(const std::string& method, double rho) const;
  const std::vector<ReportRow>& rows() const { return rows_; }
  std::vector<std::string> attack_columns() const;

  std::string to_csv() const;
  std::string to_json() const;
  static ReportTable from_csv(const std::string& text);
  static ReportTable from_json(const std::string& text);

 private:
  std::vector<ReportRow> rows_;
};

/// Average rank of each method across tables, ranking per table by the
/// given attack column at the given rho (rank 1 = highest accuracy, exact
/// ties share the mean of their positions). Every table must contain every
/// method at that rho.
std::map<std::string, double> rank_aggregate(const std::vector<ReportTable>& tables,
                                             const std::string& attack, double rho);

/// Fraction of samples whose per-sample robust objective value is at least
/// the cross-entropy at the PGD adversarial point for the same (rho, p),
/// within FP-rounding slack 1e-9. With objective = rub the bound is exact,
/// so the fraction must be 1; with arub it is a measured diagnostic.
double bound_holds_fraction(const NetworkParams& params, const Batch& batch, double rho,
                            Norm p, Objective objective, std::uint64_t seed);

}  // namespace robustnet
