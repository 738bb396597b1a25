#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falcon/layers.hpp"
#include "falcon/train_log.hpp"

namespace falcon::fuse {

// Two-layer perceptron head. The hidden activation is tanh; two stacked
// affine maps collapse to one linear map, so the literal composition is only
// available behind `linear` for comparison runs.
struct MlpHead {
  nn::DenseParams layer1;
  nn::DenseParams layer2;
  bool linear = false;

  static MlpHead make(std::size_t in, std::size_t hidden, std::size_t out, bool linear = false);
  void init(Rng& rng);

  std::size_t in_dim() const { return layer1.weight.shape[0]; }
  std::size_t out_dim() const { return layer2.weight.shape[1]; }

  std::vector<nn::Tensor*> parameters();
  std::vector<const nn::Tensor*> parameters() const;

  void save(const std::string& path) const;
  static MlpHead load(const std::string& path);
};

struct MlpCache {
  nn::Tensor x, z1, a1;
};

nn::Tensor mlp_forward(const MlpHead& head, const nn::Tensor& x, MlpCache* cache = nullptr);

struct MlpGrads {
  std::vector<nn::Tensor> params;  // layer1.w, layer1.b, layer2.w, layer2.b
  nn::Tensor dx;
};
MlpGrads mlp_backward(const MlpHead& head, const MlpCache& cache, const nn::Tensor& dy);

enum class Verdict { benign, malware };

struct DetectResult {
  double score = 0.0;
  Verdict verdict = Verdict::benign;
};

// score > 0 -> malware, otherwise benign (score exactly 0 counts as benign).
DetectResult mlp_detect(const MlpHead& head, std::span<const double> feature);

// Softmax over the 5-way head.
std::vector<double> mlp_categorize(const MlpHead& head, std::span<const double> feature);

struct HeadTrainConfig {
  std::size_t hidden = 64;
  bool linear = false;
  double lr = 0.001;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
};

// Binary detection head trained with hinge loss on +-1 labels.
MlpHead train_detector(const std::vector<std::vector<double>>& features,
                       const std::vector<int>& labels, const HeadTrainConfig& cfg,
                       nn::TrainLog* log = nullptr);

// 5-way categorization head trained with cross-entropy on 0..4 labels.
MlpHead train_categorizer(const std::vector<std::vector<double>>& features,
                          const std::vector<int>& labels, const HeadTrainConfig& cfg,
                          nn::TrainLog* log = nullptr);

}  // namespace falcon::fuse
