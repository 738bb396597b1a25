#include "io_helpers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/flow_image.hpp"

namespace falcon::cli {

std::map<std::string, int> read_labels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open labels file " + path);
  std::map<std::string, int> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line == "capture,label") {
      first = false;
      continue;
    }
    first = false;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) fail(errc::schema_error, "bad labels row: " + line);
    const std::string name = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    int label = 0;
    try {
      label = std::stoi(value);
    } catch (const std::exception&) {
      label = static_cast<int>(img::class_from_name(value));
    }
    out[name] = label;
  }
  return out;
}

void write_labels_csv(const std::map<std::string, int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "capture,label\n";
  for (const auto& [name, label] : labels) out << name << ',' << label << '\n';
}

void SequenceSet::save(const std::string& dir) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 7.0);  // 7 = sequence set
  ckpt.put_scalar("meta.count", static_cast<double>(sequences.size()));
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& seq = sequences[i];
    nn::Tensor t({seq.vectors.size(), seq.vectors.empty() ? 0 : seq.vectors[0].size()});
    std::size_t k = 0;
    for (const auto& v : seq.vectors)
      for (double e : v) t.data[k++] = e;
    ckpt.put("seq." + std::to_string(i), std::move(t));
    ckpt.put_scalar("label." + std::to_string(i), static_cast<double>(seq.label));
  }
  ckpt.save((std::filesystem::path(dir) / "sequences.ckpt").string());

  std::ofstream tsv((std::filesystem::path(dir) / "sequences.tsv").string());
  if (!tsv) fail(errc::io_error, "cannot create sequences.tsv in " + dir);
  for (std::size_t i = 0; i < sequences.size(); ++i)
    tsv << i << '\t' << sequences[i].source_name << '\t' << sequences[i].label << '\t'
        << sequences[i].vectors.size() << '\n';
}

SequenceSet SequenceSet::load(const std::string& dir) {
  const auto ckpt =
      nn::Checkpoint::load((std::filesystem::path(dir) / "sequences.ckpt").string());
  if (ckpt.get_scalar("meta.kind") != 7.0)
    fail(errc::schema_error, "not a sequence set: " + dir);
  const std::size_t count = static_cast<std::size_t>(ckpt.get_scalar("meta.count"));

  SequenceSet set;
  set.sequences.resize(count);
  std::ifstream tsv((std::filesystem::path(dir) / "sequences.tsv").string());
  if (!tsv) fail(errc::io_error, "missing sequences.tsv in " + dir);
  std::string line;
  while (std::getline(tsv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t index = 0, length = 0;
    std::string name;
    int label = 0;
    row >> index;
    row >> name >> label >> length;
    if (index >= count) fail(errc::schema_error, "sequence index out of range in " + dir);
    set.sequences[index].source_name = name;
  }

  for (std::size_t i = 0; i < count; ++i) {
    const nn::Tensor& t = ckpt.get("seq." + std::to_string(i));
    auto& seq = set.sequences[i];
    seq.label = static_cast<int>(ckpt.get_scalar("label." + std::to_string(i)));
    const std::size_t steps = t.shape[0], dim = t.shape[1];
    seq.vectors.assign(steps, net::FlowVector(dim));
    for (std::size_t s = 0; s < steps; ++s)
      for (std::size_t d = 0; d < dim; ++d) seq.vectors[s][d] = t.data[s * dim + d];
  }
  return set;
}

void write_predictions_csv(const Predictions& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "id,label,pred\n";
  for (std::size_t i = 0; i < p.ids.size(); ++i)
    out << p.ids[i] << ',' << p.labels[i] << ',' << p.preds[i] << '\n';
}

Predictions read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "id,label,pred")
    fail(errc::schema_error, "predictions csv needs an id,label,pred header: " + path);
  Predictions p;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, label, pred;
    if (!std::getline(row, id, ',') || !std::getline(row, label, ',') ||
        !std::getline(row, pred, ','))
      fail(errc::schema_error, "bad predictions row: " + line);
    p.ids.push_back(id);
    p.labels.push_back(std::stoi(label));
    p.preds.push_back(std::stoi(pred));
  }
  return p;
}

}  // namespace falcon::cli
