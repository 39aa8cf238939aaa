#pragma once

#include <span>
#include <string>
#include <vector>

#include "pyroclass/tensor.hpp"

namespace pyroclass {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::size_t> counts;  // k*k, row-major

  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * k + predicted]; }
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t predicted) const;
  std::size_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws LabelError when an index is outside [0, k) or lengths differ.
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t k);

/// counts * 100 / row sum, unrounded. Throws DataError naming the class of an
/// empty row (`names` may be empty, in which case the index is used).
std::vector<std::vector<double>> row_percent(const ConfusionMatrix& matrix,
                                             const std::vector<std::string>& names = {});

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationReport {
  std::vector<ClassScores> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Ratios with a zero denominator are reported as 0.
ClassificationReport precision_recall_f1(const ConfusionMatrix& matrix);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocSeries {
  std::string name;
  /// False when the class has no positives or no negatives; points are then
  /// empty and the series is left out of the macro average.
  bool defined = true;
  std::vector<RocPoint> points;  // ascending threshold
  double auc = 0.0;
};

struct RocCurve {
  std::vector<RocSeries> classes;
  RocSeries micro;
  RocSeries macro;
};

/// 0.00, 0.01, ..., 1.00.
std::vector<double> default_thresholds();

/// One-vs-rest threshold sweep: class c is predicted positive at tau when
/// score_c >= tau. Micro pools every (sample, class) decision; macro averages
/// the defined class curves pointwise over the threshold grid. Each curve gets
/// (1,1) at -inf and (0,0) at +inf added when the grid does not reach them.
RocCurve roc_sweep(const Tensor& scores, std::span<const int> labels,
                   std::span<const double> thresholds, const std::vector<std::string>& names = {});
RocCurve roc_sweep(const Tensor& scores, std::span<const int> labels,
                   const std::vector<std::string>& names = {});

/// Trapezoidal area over (fpr, tpr) points sorted by fpr, ties by tpr.
/// Throws ConfigError on unsorted input.
double auc(std::span<const RocPoint> points_by_fpr);
/// Area of a threshold-ordered series.
double series_auc(const std::vector<RocPoint>& by_threshold);

/// Percent table with one decimal: K rows "name,p0,...", then a label row.
std::string confusion_csv(const ConfusionMatrix& matrix, const std::vector<std::string>& names);
/// Header `class,threshold,fpr,tpr`; micro and macro rows follow the classes.
std::string roc_csv(const RocCurve& curve);
std::string metrics_json(const ConfusionMatrix& matrix, const ClassificationReport& report,
                         const RocCurve& curve, const std::vector<std::string>& names);

/// Shortest round-trip text for a double ("inf"/"-inf" for infinities).
std::string format_double(double v);

}  // namespace pyroclass
