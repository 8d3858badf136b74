#include "spnet/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "spnet/errors.hpp"

namespace spnet {
namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t n) {
  if (truth >= classes || pred >= classes) {
    throw InputError("class id out of range for a " + std::to_string(classes) + "-class matrix");
  }
  counts[truth * classes + pred] += n;
}

void ConfusionMatrix::add(std::span<const std::int32_t> truth, std::span<const std::int32_t> pred) {
  if (truth.size() != pred.size()) throw ShapeError("truth and prediction lengths differ");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || pred[i] < 0) throw InputError("negative class id");
    add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes != classes) throw ShapeError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::truth_count(std::size_t c) const {
  std::uint64_t t = 0;
  for (std::size_t p = 0; p < classes; ++p) t += at(c, p);
  return t;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t c) const {
  std::uint64_t t = 0;
  for (std::size_t r = 0; r < classes; ++r) t += at(r, c);
  return t;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw UndefinedMetricError("overall accuracy of an empty confusion matrix");
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

std::optional<double> class_iou(const ConfusionMatrix& cm, std::size_t c) {
  const std::uint64_t tp = cm.at(c, c);
  const std::uint64_t denom = cm.truth_count(c) + cm.predicted_count(c) - tp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

double mean_iou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    if (const auto iou = class_iou(cm, c)) {
      sum += *iou;
      ++n;
    }
  }
  if (n == 0) throw UndefinedMetricError("mean IoU undefined: every class is absent");
  return sum / static_cast<double>(n);
}

EvalReport make_report(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  EvalReport r;
  r.overall_accuracy = overall_accuracy(cm);
  r.mean_iou = mean_iou(cm);
  r.points = cm.total();
  for (std::size_t c = 0; c < cm.classes; ++c) {
    ClassReport cr;
    cr.name = c < class_names.size() ? class_names[c] : "class_" + std::to_string(c);
    cr.iou = class_iou(cm, c);
    cr.points = cm.truth_count(c);
    if (cr.points > 0) cr.accuracy = static_cast<double>(cm.at(c, c)) / static_cast<double>(cr.points);
    r.classes.push_back(cr);
  }
  return r;
}

std::string report_tsv(const EvalReport& report) {
  std::ostringstream os;
  os << "name\tiou\taccuracy\tpoints\n";
  for (const ClassReport& c : report.classes) {
    os << c.name << '\t' << fmt(c.iou) << '\t' << fmt(c.accuracy) << '\t' << c.points << '\n';
  }
  os << "__overall__\t" << fmt(report.mean_iou) << '\t' << fmt(report.overall_accuracy) << '\t'
     << report.points << '\n';
  return os.str();
}

std::string report_text(const EvalReport& report) {
  std::size_t width = std::string("overall").size();
  for (const ClassReport& c : report.classes) width = std::max(width, c.name.size());
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %10s\n", static_cast<int>(width), "class", "IoU",
                "accuracy", "points");
  os << line;
  for (const ClassReport& c : report.classes) {
    std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %10llu\n", static_cast<int>(width),
                  c.name.c_str(), fmt(c.iou).c_str(), fmt(c.accuracy).c_str(),
                  static_cast<unsigned long long>(c.points));
    os << line;
  }
  std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %10llu\n", static_cast<int>(width), "overall",
                fmt(report.mean_iou).c_str(), fmt(report.overall_accuracy).c_str(),
                static_cast<unsigned long long>(report.points));
  os << line;
  return os.str();
}

}  // namespace spnet
