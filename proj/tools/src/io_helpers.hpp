#pragma once

#include <map>
#include <string>
#include <vector>

#include "falcon/lstm.hpp"

namespace falcon::cli {

// capture,label rows; labels may be class ids or class names.
std::map<std::string, int> read_labels_csv(const std::string& path);
void write_labels_csv(const std::map<std::string, int>& labels, const std::string& path);

// One flow-vector sequence per capture, persisted as a checkpoint plus a
// readable index (sequences.ckpt / sequences.tsv in a directory).
struct SequenceSet {
  std::vector<net::CaptureSequence> sequences;

  void save(const std::string& dir) const;
  static SequenceSet load(const std::string& dir);
};

// id,label,pred rows.
struct Predictions {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> preds;
};

void write_predictions_csv(const Predictions& p, const std::string& path);
Predictions read_predictions_csv(const std::string& path);

}  // namespace falcon::cli
