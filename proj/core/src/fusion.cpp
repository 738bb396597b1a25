#include "falcon/fusion.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "falcon/error.hpp"

namespace falcon::fuse {

std::vector<double> fuse(std::span<const double> network, std::span<const double> code,
                         std::size_t expected_network_dim, std::size_t expected_code_dim) {
  if (expected_network_dim && network.size() != expected_network_dim)
    fail(errc::dim_mismatch, "network feature width mismatch");
  if (expected_code_dim && code.size() != expected_code_dim)
    fail(errc::dim_mismatch, "code feature width mismatch");
  std::vector<double> out;
  out.reserve(network.size() + code.size());
  out.insert(out.end(), network.begin(), network.end());
  out.insert(out.end(), code.begin(), code.end());
  return out;
}

void write_feature_csv(const FeatureTable& table, const std::string& path) {
  if (table.ids.size() != table.labels.size() || table.ids.size() != table.features.size())
    fail(errc::length_mismatch, "feature table columns disagree");
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  const std::size_t d = table.dim();
  out << "id,label";
  for (std::size_t i = 0; i < d; ++i) out << ",f" << i;
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (table.features[r].size() != d) fail(errc::dim_mismatch, "ragged feature rows");
    out << table.ids[r] << ',' << table.labels[r];
    for (double v : table.features[r]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

FeatureTable read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(errc::schema_error, "empty feature csv: " + path);
  std::size_t dim = 0;
  {
    std::istringstream head(line);
    std::string cell;
    if (!std::getline(head, cell, ',') || cell != "id")
      fail(errc::schema_error, "feature csv must start with id column");
    if (!std::getline(head, cell, ',') || cell != "label")
      fail(errc::schema_error, "feature csv needs a label column");
    while (std::getline(head, cell, ',')) {
      if (cell != "f" + std::to_string(dim))
        fail(errc::schema_error, "unexpected feature column '" + cell + "'");
      ++dim;
    }
  }

  FeatureTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    if (!std::getline(row, cell, ',')) fail(errc::schema_error, "bad csv row: " + line);
    table.ids.push_back(cell);
    if (!std::getline(row, cell, ',')) fail(errc::schema_error, "bad csv row: " + line);
    table.labels.push_back(std::stoi(cell));
    std::vector<double> feats;
    feats.reserve(dim);
    while (std::getline(row, cell, ',')) feats.push_back(std::stod(cell));
    if (feats.size() != dim) fail(errc::dim_mismatch, "row width mismatch in " + path);
    table.features.push_back(std::move(feats));
  }
  return table;
}

FeatureTable join_features(const FeatureTable& network, const FeatureTable& code) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < code.size(); ++i) index.emplace(code.ids[i], i);

  FeatureTable joined;
  for (std::size_t i = 0; i < network.size(); ++i) {
    const auto it = index.find(network.ids[i]);
    if (it == index.end()) continue;
    const std::size_t j = it->second;
    if (network.labels[i] != code.labels[j])
      fail(errc::schema_error, "label disagreement for id " + network.ids[i]);
    joined.ids.push_back(network.ids[i]);
    joined.labels.push_back(network.labels[i]);
    joined.features.push_back(fuse(network.features[i], code.features[j]));
  }
  if (joined.ids.empty()) fail(errc::empty_dataset, "feature join produced no rows");
  return joined;
}

}  // namespace falcon::fuse
