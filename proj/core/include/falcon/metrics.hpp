#pragma once

#include <string>
#include <vector>

#include "falcon/flow_image.hpp"

namespace falcon::fuse {

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // weighted by class support
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
  std::vector<std::size_t> support;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// Per-class precision/recall/F1 with the 0-convention on empty denominators;
// the averages weight each class by its support. num_classes = 0 infers the
// class count from the data.
Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                 std::size_t num_classes = 0);

void write_metrics_csv(const Metrics& m, const std::string& path);
void write_confusion_csv(const Metrics& m, const std::string& path);
std::string format_metrics_table(const Metrics& m);

// One-vs-rest relabeling for a named family: 1 inside the family, 0 outside.
std::vector<int> relabel_top_n(const std::vector<int>& labels, img::ClassLabel family);

}  // namespace falcon::fuse
