#include "falcon/forest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/tensor.hpp"

namespace falcon::fuse {

namespace {

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    g -= p * p;
  }
  return g;
}

struct Split {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  std::size_t n_classes;
  const ForestHyperparams& hp;
  Rng& rng;
  Tree tree;

  std::vector<std::size_t> feature_pool(std::size_t dim) {
    std::vector<std::size_t> pool(dim);
    for (std::size_t i = 0; i < dim; ++i) pool[i] = i;
    if (hp.max_features == MaxFeatures::all) return pool;
    const std::size_t take = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(dim))));
    // Partial Fisher-Yates, then ascending order so the split scan stays
    // deterministic for a given sample.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i, dim - 1));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  Split best_split(const std::vector<std::size_t>& idx,
                   const std::vector<std::size_t>& counts) {
    const std::size_t n = idx.size();
    const double parent = gini(counts, n);
    Split best;

    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left_counts(n_classes);
    for (std::size_t f : feature_pool(x.front().size())) {
      for (std::size_t i = 0; i < n; ++i) column[i] = {x[idx[i]][f], y[idx[i]]};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::fill(left_counts.begin(), left_counts.end(), 0);
      std::size_t left_n = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_counts[static_cast<std::size_t>(column[i].second)]++;
        ++left_n;
        if (column[i].first == column[i + 1].first) continue;
        const double threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;

        double left_g = 1.0, right_g = 1.0;
        const std::size_t right_n = n - left_n;
        for (std::size_t c = 0; c < n_classes; ++c) {
          const double pl = static_cast<double>(left_counts[c]) / static_cast<double>(left_n);
          const double pr = static_cast<double>(counts[c] - left_counts[c]) /
                            static_cast<double>(right_n);
          left_g -= pl * pl;
          right_g -= pr * pr;
        }
        const double weighted = (static_cast<double>(left_n) * left_g +
                                 static_cast<double>(right_n) * right_g) /
                                static_cast<double>(n);
        const double gain = parent - weighted;
        if (gain > best.gain + 1e-15) {
          best.found = true;
          best.feature = static_cast<int>(f);
          best.threshold = threshold;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  int build(const std::vector<std::size_t>& idx, std::size_t depth) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i : idx) counts[static_cast<std::size_t>(y[i])]++;
    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    if (pure || depth >= hp.max_depth || idx.size() < hp.min_samples_split) {
      tree.nodes[static_cast<std::size_t>(node_id)].counts = std::move(counts);
      return node_id;
    }

    const Split split = best_split(idx, counts);
    if (!split.found) {
      tree.nodes[static_cast<std::size_t>(node_id)].counts = std::move(counts);
      return node_id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      if (x[i][static_cast<std::size_t>(split.feature)] <= split.threshold)
        left.push_back(i);
      else
        right.push_back(i);
    }

    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }
};

}  // namespace

int Tree::predict(const std::vector<double>& x) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[at].feature)] <=
                                          nodes[at].threshold
                                      ? nodes[at].left
                                      : nodes[at].right);
  }
  const auto& counts = nodes[at].counts;
  std::size_t arg = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[arg]) arg = c;
  return static_cast<int>(arg);
}

ForestModel train_forest(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const ForestHyperparams& hp) {
  if (features.empty()) fail(errc::empty_dataset, "train_forest needs samples");
  nn::require(features.size() == labels.size(), errc::length_mismatch,
              "features/labels length mismatch");
  if (hp.n_estimators < 1 || hp.max_depth < 1 || hp.min_samples_split < 2)
    fail(errc::bad_hyperparameters, "forest needs n >= 1, depth >= 1, min_split >= 2");

  std::size_t n_classes = 0;
  {
    std::set<int> classes;
    for (int label : labels) {
      nn::require(label >= 0, errc::label_out_of_range, "forest labels must be non-negative");
      classes.insert(label);
      n_classes = std::max(n_classes, static_cast<std::size_t>(label) + 1);
    }
    if (classes.size() < 2) fail(errc::degenerate_labels, "train_forest needs >= 2 classes");
  }

  ForestModel model;
  model.hp = hp;
  model.n_classes = n_classes;
  model.n_features = features.front().size();

  const Rng master(hp.seed);
  for (std::size_t t = 0; t < hp.n_estimators; ++t) {
    Rng tree_rng = master.fork(t);
    std::vector<std::size_t> idx;
    idx.reserve(features.size());
    if (hp.bootstrap) {
      for (std::size_t i = 0; i < features.size(); ++i)
        idx.push_back(static_cast<std::size_t>(tree_rng.uniform_int(0, features.size() - 1)));
    } else {
      for (std::size_t i = 0; i < features.size(); ++i) idx.push_back(i);
    }
    TreeBuilder builder{features, labels, n_classes, hp, tree_rng, {}};
    builder.build(idx, 0);
    model.trees.push_back(std::move(builder.tree));
  }
  return model;
}

int predict_forest(const ForestModel& model, const std::vector<double>& x) {
  nn::require(x.size() == model.n_features, errc::dim_mismatch, "forest feature width");
  std::vector<std::size_t> votes(model.n_classes, 0);
  for (const Tree& tree : model.trees) votes[static_cast<std::size_t>(tree.predict(x))]++;
  std::size_t arg = 0;
  for (std::size_t c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[arg]) arg = c;
  return static_cast<int>(arg);
}

std::vector<int> predict_forest(const ForestModel& model,
                                const std::vector<std::vector<double>>& features) {
  std::vector<int> out;
  out.reserve(features.size());
  for (const auto& x : features) out.push_back(predict_forest(model, x));
  return out;
}

void ForestModel::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 5.0);  // 5 = forest
  ckpt.put_scalar("meta.n_classes", static_cast<double>(n_classes));
  ckpt.put_scalar("meta.n_features", static_cast<double>(n_features));
  ckpt.put_scalar("meta.n_trees", static_cast<double>(trees.size()));
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const Tree& tree = trees[t];
    const std::size_t n = tree.nodes.size();
    nn::Tensor desc({n, 4});          // feature, threshold, left, right
    nn::Tensor counts({n, n_classes});
    for (std::size_t i = 0; i < n; ++i) {
      desc.at2(i, 0) = tree.nodes[i].feature;
      desc.at2(i, 1) = tree.nodes[i].threshold;
      desc.at2(i, 2) = tree.nodes[i].left;
      desc.at2(i, 3) = tree.nodes[i].right;
      for (std::size_t c = 0; c < tree.nodes[i].counts.size(); ++c)
        counts.at2(i, c) = static_cast<double>(tree.nodes[i].counts[c]);
    }
    const std::string prefix = "tree" + std::to_string(t);
    ckpt.put(prefix + ".desc", std::move(desc));
    ckpt.put(prefix + ".counts", std::move(counts));
  }
  ckpt.save(path);
}

ForestModel ForestModel::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 5.0)
    fail(errc::schema_error, "checkpoint is not a forest model: " + path);
  ForestModel model;
  model.n_classes = static_cast<std::size_t>(ckpt.get_scalar("meta.n_classes"));
  model.n_features = static_cast<std::size_t>(ckpt.get_scalar("meta.n_features"));
  const std::size_t n_trees = static_cast<std::size_t>(ckpt.get_scalar("meta.n_trees"));
  for (std::size_t t = 0; t < n_trees; ++t) {
    const std::string prefix = "tree" + std::to_string(t);
    const nn::Tensor& desc = ckpt.get(prefix + ".desc");
    const nn::Tensor& counts = ckpt.get(prefix + ".counts");
    Tree tree;
    tree.nodes.resize(desc.shape[0]);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      tree.nodes[i].feature = static_cast<int>(desc.at2(i, 0));
      tree.nodes[i].threshold = desc.at2(i, 1);
      tree.nodes[i].left = static_cast<int>(desc.at2(i, 2));
      tree.nodes[i].right = static_cast<int>(desc.at2(i, 3));
      if (tree.nodes[i].feature < 0) {
        tree.nodes[i].counts.resize(model.n_classes);
        for (std::size_t c = 0; c < model.n_classes; ++c)
          tree.nodes[i].counts[c] = static_cast<std::size_t>(counts.at2(i, c));
      }
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace falcon::fuse
