#pragma once

#include <string>
#include <vector>

namespace kgt {

struct ConfusionMetrics {
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// labels/preds in {0,1}, positive class = 1.
ConfusionMetrics confusion_metrics(const std::vector<int>& labels,
                                   const std::vector<int>& preds);

double f1_score(double precision, double recall);
double harmonic_mean(double a, double b);

struct ZslMetrics {
  double t1 = 0.0;  // unseen-class accuracy, unseen candidates only
  double s = 0.0;   // seen-class accuracy, all candidates
  double u = 0.0;   // unseen-class accuracy, all candidates
  double h = 0.0;   // harmonic mean of s and u
};

// Mean over classes of the per-class accuracy. correct/total are parallel
// per-class tallies; classes with zero examples are skipped.
double class_balanced_accuracy(const std::vector<size_t>& correct,
                               const std::vector<size_t>& total);

struct MetricRow {
  std::string task;
  std::string metric;
  double value = 0.0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::string metrics_summary(const std::vector<MetricRow>& rows);

}  // namespace kgt
