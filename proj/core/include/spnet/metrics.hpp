#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spnet {

// counts[t * C + p]: points of true class t predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  // Throws InputError for out-of-range ids.
  void add(std::size_t truth, std::size_t pred, std::uint64_t n = 1);
  void add(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred);
  void merge(const ConfusionMatrix& other);
  std::uint64_t total() const;
  std::uint64_t truth_count(std::size_t c) const;
  std::uint64_t predicted_count(std::size_t c) const;
};

// trace / total; throws UndefinedMetricError when empty.
double overall_accuracy(const ConfusionMatrix& cm);
// TP / (TP + FP + FN), or nullopt for a class absent from truth and prediction.
std::optional<double> class_iou(const ConfusionMatrix& cm, std::size_t c);
// Mean IoU over classes present in truth or prediction; throws
// UndefinedMetricError when there is none.
double mean_iou(const ConfusionMatrix& cm);

struct ClassReport {
  std::string name;
  std::optional<double> iou;
  std::optional<double> accuracy;  // recall, undefined without true points
  std::uint64_t points = 0;        // true points
};

struct EvalReport {
  std::vector<ClassReport> classes;
  double overall_accuracy = 0.0;
  double mean_iou = 0.0;
  std::uint64_t points = 0;
};

EvalReport make_report(const ConfusionMatrix& cm, std::span<const std::string> class_names = {});

// Header `name iou accuracy points`, one row per class and `__overall__`
// (iou = mIoU, accuracy = OA). Undefined values print as `nan`.
std::string report_tsv(const EvalReport& report);
std::string report_text(const EvalReport& report);

}  // namespace spnet
