#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "falcon/rng.hpp"

namespace falcon::fuse {

enum class MaxFeatures {
  sqrt_rule,  // ceil(sqrt(d)) features sampled without replacement per split
  all,
};

struct ForestHyperparams {
  std::size_t n_estimators = 1400;
  std::size_t max_depth = 80;
  std::size_t min_samples_split = 5;
  MaxFeatures max_features = MaxFeatures::sqrt_rule;
  bool bootstrap = true;
  std::uint64_t seed = 1;

  // Desk-scale preset used by the test suites: the paper-sized forest with a
  // hundred trees instead of 1,400.
  static ForestHyperparams desk_scale(std::uint64_t seed = 1) {
    ForestHyperparams hp;
    hp.n_estimators = 100;
    hp.seed = seed;
    return hp;
  }
};

// Internal node when feature >= 0, leaf otherwise. Samples with
// x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::size_t> counts;  // leaf class histogram
};

struct Tree {
  std::vector<TreeNode> nodes;

  int predict(const std::vector<double>& x) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestHyperparams hp;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;

  void save(const std::string& path) const;
  static ForestModel load(const std::string& path);
};

// CART with Gini impurity. Split search scans features in ascending index and
// candidate thresholds (midpoints of consecutive distinct values) in
// ascending order; strictly better gain wins, so ties resolve to the lowest
// (feature, threshold). Per-tree randomness derives from hp.seed.
ForestModel train_forest(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const ForestHyperparams& hp);

// Majority vote over trees; vote ties resolve to the lowest class id.
int predict_forest(const ForestModel& model, const std::vector<double>& x);

std::vector<int> predict_forest(const ForestModel& model,
                                const std::vector<std::vector<double>>& features);

}  // namespace falcon::fuse
