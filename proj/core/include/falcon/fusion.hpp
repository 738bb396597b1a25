#pragma once

#include <span>
#include <string>
#include <vector>

namespace falcon::fuse {

// Concatenation, network feature first. Non-zero expected widths are checked.
std::vector<double> fuse(std::span<const double> network, std::span<const double> code,
                         std::size_t expected_network_dim = 0, std::size_t expected_code_dim = 0);

// Feature matrix exchange file: CSV with header id,label,f0..f{d-1}.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> features;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

void write_feature_csv(const FeatureTable& table, const std::string& path);
FeatureTable read_feature_csv(const std::string& path);

// Inner join on id; labels must agree; network columns come first.
FeatureTable join_features(const FeatureTable& network, const FeatureTable& code);

}  // namespace falcon::fuse
