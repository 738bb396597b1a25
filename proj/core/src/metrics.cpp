#include "falcon/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "falcon/error.hpp"

namespace falcon::fuse {

Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels,
                 std::size_t num_classes) {
  if (labels.empty()) fail(errc::empty_input, "evaluate needs at least one sample");
  if (predictions.size() != labels.size())
    fail(errc::length_mismatch, "predictions/labels length mismatch");

  std::size_t k = num_classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || predictions[i] < 0)
      fail(errc::label_out_of_range, "labels must be non-negative");
    k = std::max({k, static_cast<std::size_t>(labels[i]) + 1,
                  static_cast<std::size_t>(predictions[i]) + 1});
  }

  Metrics m;
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < labels.size(); ++i)
    m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])]++;

  m.class_precision.assign(k, 0.0);
  m.class_recall.assign(k, 0.0);
  m.class_f1.assign(k, 0.0);
  m.support.assign(k, 0);

  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t tp = m.confusion[c][c];
    correct += tp;
    std::size_t pred_c = 0, true_c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      pred_c += m.confusion[j][c];
      true_c += m.confusion[c][j];
    }
    m.support[c] = true_c;
    m.class_precision[c] = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    m.class_recall[c] = true_c ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
    const double pr = m.class_precision[c] + m.class_recall[c];
    m.class_f1[c] = pr > 0.0 ? 2.0 * m.class_precision[c] * m.class_recall[c] / pr : 0.0;
  }

  const double n = static_cast<double>(labels.size());
  m.accuracy = static_cast<double>(correct) / n;
  for (std::size_t c = 0; c < k; ++c) {
    const double w = static_cast<double>(m.support[c]) / n;
    m.precision += w * m.class_precision[c];
    m.recall += w * m.class_recall[c];
    m.f1 += w * m.class_f1[c];
  }
  return m;
}

void write_metrics_csv(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out.precision(17);
  out << "metric,value\n";
  out << "accuracy," << m.accuracy << "\n";
  out << "precision_weighted," << m.precision << "\n";
  out << "recall_weighted," << m.recall << "\n";
  out << "f1_weighted," << m.f1 << "\n";
  for (std::size_t c = 0; c < m.class_precision.size(); ++c) {
    out << "precision_class" << c << ',' << m.class_precision[c] << "\n";
    out << "recall_class" << c << ',' << m.class_recall[c] << "\n";
    out << "f1_class" << c << ',' << m.class_f1[c] << "\n";
    out << "support_class" << c << ',' << m.support[c] << "\n";
  }
}

void write_confusion_csv(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  const std::size_t k = m.confusion.size();
  out << "true\\pred";
  for (std::size_t j = 0; j < k; ++j) out << ',' << j;
  out << '\n';
  for (std::size_t i = 0; i < k; ++i) {
    out << i;
    for (std::size_t j = 0; j < k; ++j) out << ',' << m.confusion[i][j];
    out << '\n';
  }
}

std::string format_metrics_table(const Metrics& m) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "accuracy  " << m.accuracy << "\n";
  out << "precision " << m.precision << "  (weighted)\n";
  out << "recall    " << m.recall << "  (weighted)\n";
  out << "f1        " << m.f1 << "  (weighted)\n";
  out << "class  precision  recall    f1        support\n";
  for (std::size_t c = 0; c < m.class_precision.size(); ++c) {
    out << c << "      " << m.class_precision[c] << "     " << m.class_recall[c] << "    "
        << m.class_f1[c] << "    " << m.support[c] << "\n";
  }
  return out.str();
}

std::vector<int> relabel_top_n(const std::vector<int>& labels, img::ClassLabel family) {
  const int target = static_cast<int>(family);
  std::vector<int> out;
  out.reserve(labels.size());
  bool seen = false;
  for (int label : labels) {
    if (label < 0 || label >= img::kNumClasses)
      fail(errc::unknown_family, "label outside the 5-class universe");
    const bool hit = label == target;
    seen = seen || hit;
    out.push_back(hit ? 1 : 0);
  }
  if (!seen && !labels.empty())
    std::cerr << "warning: family " << img::class_name(family) << " absent from data\n";
  return out;
}

}  // namespace falcon::fuse
