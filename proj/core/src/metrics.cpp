#include "kgt/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "kgt/errors.hpp"

namespace kgt {

ConfusionMetrics confusion_metrics(const std::vector<int>& labels,
                                   const std::vector<int>& preds) {
  if (labels.size() != preds.size()) {
    throw DataError("confusion_metrics: labels/preds size mismatch");
  }
  ConfusionMetrics m;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (preds[i] == 1 ? m.tp : m.fn)++;
    } else {
      (preds[i] == 1 ? m.fp : m.tn)++;
    }
  }
  const size_t n = labels.size();
  m.accuracy = n ? static_cast<double>(m.tp + m.tn) / n : 0.0;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

double f1_score(double precision, double recall) {
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double harmonic_mean(double a, double b) {
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

double class_balanced_accuracy(const std::vector<size_t>& correct,
                               const std::vector<size_t>& total) {
  if (correct.size() != total.size()) {
    throw DataError("class_balanced_accuracy: size mismatch");
  }
  double sum = 0.0;
  size_t classes = 0;
  for (size_t i = 0; i < total.size(); ++i) {
    if (total[i] == 0) continue;
    sum += static_cast<double>(correct[i]) / static_cast<double>(total[i]);
    ++classes;
  }
  return classes ? sum / static_cast<double>(classes) : 0.0;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "task,metric,value\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    os << r.task << "," << r.metric << "," << buf << "\n";
  }
  return os.str();
}

std::string metrics_summary(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-10s %-12s %.6f", r.task.c_str(),
                  r.metric.c_str(), r.value);
    os << buf << "\n";
  }
  return os.str();
}

}  // namespace kgt
