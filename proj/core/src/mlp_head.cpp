#include "falcon/mlp_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/optim.hpp"

namespace falcon::fuse {

MlpHead MlpHead::make(std::size_t in, std::size_t hidden, std::size_t out, bool linear) {
  MlpHead h;
  h.layer1 = nn::DenseParams::make(in, hidden);
  h.layer2 = nn::DenseParams::make(hidden, out);
  h.linear = linear;
  return h;
}

void MlpHead::init(Rng& rng) {
  layer1.init_glorot_uniform(rng);
  layer2.init_glorot_uniform(rng);
}

std::vector<nn::Tensor*> MlpHead::parameters() {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias};
}

std::vector<const nn::Tensor*> MlpHead::parameters() const {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias};
}

void MlpHead::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 4.0);  // 4 = mlp head
  ckpt.put_scalar("meta.linear", linear ? 1.0 : 0.0);
  ckpt.put("layer1.weight", layer1.weight);
  ckpt.put("layer1.bias", layer1.bias);
  ckpt.put("layer2.weight", layer2.weight);
  ckpt.put("layer2.bias", layer2.bias);
  ckpt.save(path);
}

MlpHead MlpHead::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 4.0)
    fail(errc::schema_error, "checkpoint is not an mlp head: " + path);
  MlpHead h;
  h.linear = ckpt.get_scalar("meta.linear") == 1.0;
  h.layer1.weight = ckpt.get("layer1.weight");
  h.layer1.bias = ckpt.get("layer1.bias");
  h.layer2.weight = ckpt.get("layer2.weight");
  h.layer2.bias = ckpt.get("layer2.bias");
  return h;
}

nn::Tensor mlp_forward(const MlpHead& head, const nn::Tensor& x, MlpCache* cache) {
  MlpCache local;
  MlpCache& c = cache ? *cache : local;
  c.x = x;
  c.z1 = nn::dense_forward(x, head.layer1);
  c.a1 = head.linear ? c.z1 : nn::tanh_map(c.z1);
  return nn::dense_forward(c.a1, head.layer2);
}

MlpGrads mlp_backward(const MlpHead& head, const MlpCache& cache, const nn::Tensor& dy) {
  auto g2 = nn::dense_backward(cache.a1, head.layer2, dy);
  nn::Tensor da1 = std::move(g2.dx);
  if (!head.linear) {
    for (std::size_t i = 0; i < da1.numel(); ++i)
      da1.data[i] *= 1.0 - cache.a1.data[i] * cache.a1.data[i];
  }
  auto g1 = nn::dense_backward(cache.x, head.layer1, da1);
  MlpGrads g;
  g.params.push_back(std::move(g1.dweight));
  g.params.push_back(std::move(g1.dbias));
  g.params.push_back(std::move(g2.dweight));
  g.params.push_back(std::move(g2.dbias));
  g.dx = std::move(g1.dx);
  return g;
}

namespace {

nn::Tensor row_tensor(std::span<const double> feature) {
  nn::Tensor x({1, feature.size()});
  std::copy(feature.begin(), feature.end(), x.data.begin());
  return x;
}

nn::Tensor rows_tensor(const std::vector<std::vector<double>>& features,
                       const std::vector<std::size_t>& pick) {
  const std::size_t dim = features.front().size();
  nn::Tensor x({pick.size(), dim});
  for (std::size_t r = 0; r < pick.size(); ++r) {
    nn::require(features[pick[r]].size() == dim, errc::dim_mismatch,
                "feature rows must share one width");
    std::copy(features[pick[r]].begin(), features[pick[r]].end(), &x.data[r * dim]);
  }
  return x;
}

}  // namespace

DetectResult mlp_detect(const MlpHead& head, std::span<const double> feature) {
  nn::require(feature.size() == head.in_dim(), errc::dim_mismatch, "detect feature width");
  nn::require(head.out_dim() == 1, errc::dim_mismatch, "detection head must output a scalar");
  const nn::Tensor y = mlp_forward(head, row_tensor(feature));
  DetectResult r;
  r.score = y[0];
  r.verdict = r.score > 0.0 ? Verdict::malware : Verdict::benign;
  return r;
}

std::vector<double> mlp_categorize(const MlpHead& head, std::span<const double> feature) {
  nn::require(feature.size() == head.in_dim(), errc::dim_mismatch, "categorize feature width");
  const nn::Tensor y = mlp_forward(head, row_tensor(feature));
  const nn::Tensor p = nn::softmax(y);
  return std::vector<double>(p.data.begin(), p.data.end());
}

namespace {

MlpHead train_head(const std::vector<std::vector<double>>& features,
                   const std::vector<int>& labels, const HeadTrainConfig& cfg, bool binary,
                   nn::TrainLog* log) {
  if (features.empty()) fail(errc::empty_dataset, "no training features");
  nn::require(features.size() == labels.size(), errc::length_mismatch,
              "features/labels length mismatch");
  {
    std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2) fail(errc::degenerate_labels, "training needs both labels present");
    if (binary)
      for (int y : classes)
        nn::require(y == 1 || y == -1, errc::label_out_of_range,
                    "detection labels must be +1/-1");
  }

  const std::size_t dim = features.front().size();
  Rng rng(cfg.seed);
  MlpHead head = MlpHead::make(dim, cfg.hidden, binary ? 1 : 5, cfg.linear);
  head.init(rng);

  auto params = head.parameters();
  nn::AdamState adam(nn::AdamConfig{cfg.lr});
  adam.attach(params);

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0, batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      std::vector<std::size_t> pick(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      const nn::Tensor x = rows_tensor(features, pick);

      MlpCache cache;
      const nn::Tensor out = mlp_forward(head, x, &cache);
      nn::Tensor dout(out.shape);
      const double inv_n = 1.0 / static_cast<double>(pick.size());

      if (binary) {
        // Hinge: mean max(0, 1 - y*score).
        for (std::size_t r = 0; r < pick.size(); ++r) {
          const double y = static_cast<double>(labels[pick[r]]);
          const double margin = 1.0 - y * out.at2(r, 0);
          if (margin > 0.0) {
            loss_sum += margin * inv_n;
            dout.at2(r, 0) = -y * inv_n;
          }
          const bool malware = out.at2(r, 0) > 0.0;
          if ((labels[pick[r]] == 1) == malware) ++hits;
        }
      } else {
        std::vector<int> batch_labels;
        for (std::size_t idx : pick) batch_labels.push_back(labels[idx]);
        const auto ce = nn::sparse_ce_loss(out, batch_labels);
        loss_sum += ce.loss;
        dout = ce.dlogits;
        for (std::size_t r = 0; r < pick.size(); ++r) {
          std::size_t arg = 0;
          for (std::size_t k = 1; k < out.shape[1]; ++k)
            if (out.at2(r, k) > out.at2(r, arg)) arg = k;
          if (static_cast<int>(arg) == batch_labels[r]) ++hits;
        }
      }

      const auto grads = mlp_backward(head, cache, dout);
      std::vector<const nn::Tensor*> gptrs;
      for (const auto& g : grads.params) gptrs.push_back(&g);
      nn::adam_step(params, gptrs, adam);
      ++batches;
    }
    if (log)
      log->push_back(nn::EpochStats{
          epoch, loss_sum / static_cast<double>(batches ? batches : 1),
          static_cast<double>(hits) / static_cast<double>(order.size())});
  }
  return head;
}

}  // namespace

MlpHead train_detector(const std::vector<std::vector<double>>& features,
                       const std::vector<int>& labels, const HeadTrainConfig& cfg,
                       nn::TrainLog* log) {
  return train_head(features, labels, cfg, true, log);
}

MlpHead train_categorizer(const std::vector<std::vector<double>>& features,
                          const std::vector<int>& labels, const HeadTrainConfig& cfg,
                          nn::TrainLog* log) {
  for (int y : labels)
    nn::require(y >= 0 && y < 5, errc::label_out_of_range, "categorizer labels must be 0..4");
  return train_head(features, labels, cfg, false, log);
}

}  // namespace falcon::fuse
