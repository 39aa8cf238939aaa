#include "pyroclass/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "pyroclass/error.hpp"
#include "pyroclass/log.hpp"

namespace pyroclass {

namespace {

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : std::to_string(c);
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Adds the (1,1) and (0,0) corners when the threshold grid misses them.
void force_endpoints(std::vector<RocPoint>& pts) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (pts.empty() || pts.front().fpr != 1.0 || pts.front().tpr != 1.0) pts.insert(pts.begin(), {-inf, 1.0, 1.0});
  if (pts.back().fpr != 0.0 || pts.back().tpr != 0.0) pts.push_back({inf, 0.0, 0.0});
}

}  // namespace

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < k; ++j) s += at(truth, j);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < k; ++i) s += at(i, predicted);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t k) {
  if (predictions.size() != labels.size()) {
    throw LabelError("confusion_matrix: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix m{k, std::vector<std::size_t>(k * k, 0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k) {
      throw LabelError("confusion_matrix: class index out of range at sample " + std::to_string(i));
    }
    ++m.counts[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(p)];
  }
  return m;
}

std::vector<std::vector<double>> row_percent(const ConfusionMatrix& matrix,
                                             const std::vector<std::string>& names) {
  std::vector<std::vector<double>> out(matrix.k, std::vector<double>(matrix.k));
  for (std::size_t i = 0; i < matrix.k; ++i) {
    const std::size_t rs = matrix.row_sum(i);
    if (rs == 0) throw DataError("row percentages undefined: class '" + class_name(names, i) + "' has no samples");
    for (std::size_t j = 0; j < matrix.k; ++j) {
      out[i][j] = static_cast<double>(matrix.at(i, j)) * 100.0 / static_cast<double>(rs);
    }
  }
  return out;
}

ClassificationReport precision_recall_f1(const ConfusionMatrix& matrix) {
  if (matrix.k < 2) throw ShapeError("precision_recall_f1 needs at least two classes");
  const std::size_t total = matrix.total();
  if (total == 0) throw DataError("precision_recall_f1: empty confusion matrix");
  ClassificationReport r;
  std::size_t trace = 0;
  for (std::size_t c = 0; c < matrix.k; ++c) {
    const std::size_t tp = matrix.at(c, c);
    trace += tp;
    ClassScores s;
    s.precision = ratio(tp, matrix.col_sum(c));
    s.recall = ratio(tp, matrix.row_sum(c));
    const double den = s.precision + s.recall;
    s.f1 = den == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / den;
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
    r.per_class.push_back(s);
  }
  const auto kd = static_cast<double>(matrix.k);
  r.macro_precision /= kd;
  r.macro_recall /= kd;
  r.macro_f1 /= kd;
  r.accuracy = ratio(trace, total);
  return r;
}

std::vector<double> default_thresholds() {
  std::vector<double> t(101);
  for (int i = 0; i <= 100; ++i) t[static_cast<std::size_t>(i)] = i / 100.0;
  return t;
}

double auc(std::span<const RocPoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (b.fpr < a.fpr || (b.fpr == a.fpr && b.tpr < a.tpr)) {
      throw ConfigError("auc: points must be sorted by fpr, ties by tpr");
    }
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double series_auc(const std::vector<RocPoint>& by_threshold) {
  std::vector<RocPoint> rev(by_threshold.rbegin(), by_threshold.rend());
  return auc(rev);
}

RocCurve roc_sweep(const Tensor& scores, std::span<const int> labels, std::span<const double> thresholds,
                   const std::vector<std::string>& names) {
  if (scores.rank() != 2 || scores.extent(0) != labels.size()) {
    throw ShapeError("roc_sweep: scores " + shape_string(scores.shape()) + " for " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i - 1])) throw ConfigError("roc_sweep: thresholds must increase");
  }
  const std::size_t n = scores.extent(0), k = scores.extent(1);
  std::vector<std::size_t> pos(k, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw LabelError("roc_sweep: label out of range");
    ++pos[static_cast<std::size_t>(y)];
  }

  RocCurve curve;
  curve.micro.name = "micro";
  curve.macro.name = "macro";
  const std::size_t nt = thresholds.size();
  std::vector<std::size_t> micro_tp(nt, 0), micro_fp(nt, 0);
  std::vector<double> macro_tpr(nt, 0.0), macro_fpr(nt, 0.0);
  std::size_t defined = 0;

  for (std::size_t c = 0; c < k; ++c) {
    RocSeries s;
    s.name = class_name(names, c);
    const std::size_t p = pos[c], neg = n - pos[c];
    s.defined = p > 0 && neg > 0;
    for (std::size_t t = 0; t < nt; ++t) {
      std::size_t tp = 0, fp = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<double>(scores[i * k + c]) >= thresholds[t]) {
          if (static_cast<std::size_t>(labels[i]) == c) ++tp; else ++fp;
        }
      }
      micro_tp[t] += tp;
      micro_fp[t] += fp;
      if (s.defined) s.points.push_back({thresholds[t], ratio(fp, neg), ratio(tp, p)});
    }
    if (s.defined) {
      ++defined;
      for (std::size_t t = 0; t < nt; ++t) {
        macro_tpr[t] += s.points[t].tpr;
        macro_fpr[t] += s.points[t].fpr;
      }
      force_endpoints(s.points);
      s.auc = series_auc(s.points);
    } else {
      warn("ROC for class '" + s.name + "' is undefined (no " + (p == 0 ? "positive" : "negative") +
           " samples); left out of the macro average");
    }
    curve.classes.push_back(std::move(s));
  }

  for (std::size_t t = 0; t < nt; ++t) {
    curve.micro.points.push_back({thresholds[t], ratio(micro_fp[t], n * (k - 1)), ratio(micro_tp[t], n)});
  }
  force_endpoints(curve.micro.points);
  curve.micro.auc = series_auc(curve.micro.points);

  curve.macro.defined = defined > 0;
  if (defined > 0) {
    const auto d = static_cast<double>(defined);
    for (std::size_t t = 0; t < nt; ++t) {
      curve.macro.points.push_back({thresholds[t], macro_fpr[t] / d, macro_tpr[t] / d});
    }
    force_endpoints(curve.macro.points);
    curve.macro.auc = series_auc(curve.macro.points);
  }
  return curve;
}

RocCurve roc_sweep(const Tensor& scores, std::span<const int> labels, const std::vector<std::string>& names) {
  const auto t = default_thresholds();
  return roc_sweep(scores, labels, t, names);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string confusion_csv(const ConfusionMatrix& matrix, const std::vector<std::string>& names) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < matrix.k; ++i) {
    out += class_name(names, i);
    const std::size_t rs = matrix.row_sum(i);
    for (std::size_t j = 0; j < matrix.k; ++j) {
      out += ',';
      if (rs == 0) continue;
      std::snprintf(buf, sizeof(buf), "%.1f", static_cast<double>(matrix.at(i, j)) * 100.0 / static_cast<double>(rs));
      out += buf;
    }
    out += '\n';
  }
  for (std::size_t j = 0; j < matrix.k; ++j) out += ',' + class_name(names, j);
  out += '\n';
  return out;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "class,threshold,fpr,tpr\n";
  auto emit = [&out](const RocSeries& s) {
    for (const auto& p : s.points) {
      out += s.name + ',' + format_double(p.threshold) + ',' + format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
    }
  };
  for (const auto& s : curve.classes) emit(s);
  emit(curve.micro);
  emit(curve.macro);
  return out;
}

std::string metrics_json(const ConfusionMatrix& matrix, const ClassificationReport& report,
                         const RocCurve& curve, const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < matrix.k; ++c) j["classes"].push_back(class_name(names, c));
  j["confusion"] = nlohmann::ordered_json::array();
  j["row_percent"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < matrix.k; ++i) {
    auto row = nlohmann::ordered_json::array();
    auto pct = nlohmann::ordered_json::array();
    const std::size_t rs = matrix.row_sum(i);
    for (std::size_t jj = 0; jj < matrix.k; ++jj) {
      row.push_back(matrix.at(i, jj));
      if (rs > 0) pct.push_back(static_cast<double>(matrix.at(i, jj)) * 100.0 / static_cast<double>(rs));
    }
    j["confusion"].push_back(row);
    j["row_percent"].push_back(rs > 0 ? pct : nlohmann::ordered_json());
  }
  j["accuracy"] = report.accuracy;
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["per_class"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    nlohmann::ordered_json e;
    e["class"] = class_name(names, c);
    e["precision"] = s.precision;
    e["recall"] = s.recall;
    e["f1"] = s.f1;
    e["auc"] = curve.classes.size() > c && curve.classes[c].defined ? nlohmann::ordered_json(curve.classes[c].auc)
                                                                     : nlohmann::ordered_json();
    j["per_class"].push_back(e);
  }
  j["micro_auc"] = curve.micro.auc;
  j["macro_auc"] = curve.macro.defined ? nlohmann::ordered_json(curve.macro.auc) : nlohmann::ordered_json();
  return j.dump(2) + "\n";
}

}  // namespace pyroclass
