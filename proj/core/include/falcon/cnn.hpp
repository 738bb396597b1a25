#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "falcon/flow_image.hpp"
#include "falcon/layers.hpp"
#include "falcon/rng.hpp"
#include "falcon/train_log.hpp"

namespace falcon::net {

inline constexpr std::size_t kFlowVectorDim = 32;

using FlowVector = std::vector<double>;  // always length 32

struct CnnConfig {
  std::size_t c1 = 16;
  std::size_t c2 = 32;
  nn::Padding padding = nn::Padding::valid;
  double dropout_rate = 0.5;
  double lr = 0.001;
  std::size_t epochs = 50;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
};

// conv(3x3,1->c1) relu pool conv(3x3,c1->c2) relu pool flatten dropout
// fc1(flat->32) fc2(32->5). The flatten width is derived from c2 and the
// padding mode, never hard-coded.
struct CnnModel {
  std::size_t c1 = 0;
  std::size_t c2 = 0;
  nn::Padding padding = nn::Padding::valid;
  double dropout_rate = 0.5;
  std::size_t flatten_dim = 0;

  nn::Conv2dParams conv1;
  nn::Conv2dParams conv2;
  nn::DenseParams fc1;
  nn::DenseParams fc2;

  static CnnModel init(const CnnConfig& cfg, Rng& rng);
  static std::size_t derive_flatten_dim(std::size_t c2, nn::Padding padding);

  std::vector<nn::Tensor*> parameters();
  std::vector<const nn::Tensor*> parameters() const;

  void save(const std::string& path) const;
  static CnnModel load(const std::string& path);
};

struct CnnForwardCache {
  nn::Tensor x;
  nn::Tensor z1, a1;
  nn::MaxPoolResult p1;
  nn::Tensor z2, a2;
  nn::MaxPoolResult p2;
  nn::Tensor flat;
  nn::DropoutResult drop;
  nn::Tensor y3;  // fc1 output, the 32-wide feature
};

// x is [N,28,28,1] with pixels already scaled to [0,1].
nn::Tensor cnn_forward(const CnnModel& m, const nn::Tensor& x, bool training, Rng* rng,
                       CnnForwardCache* cache);

// Gradients in parameters() order given d(loss)/d(logits).
std::vector<nn::Tensor> cnn_backward(const CnnModel& m, const CnnForwardCache& cache,
                                     const nn::Tensor& dlogits);

nn::Tensor images_to_tensor(const std::vector<img::FlowImage>& images);

using nn::EpochStats;
using nn::TrainLog;

// Adam lr 0.001, sparse categorical cross-entropy, inverted dropout between
// pool2 and fc1 at training time.
CnnModel train_cnn(const img::ImageCorpus& corpus, const CnnConfig& cfg,
                   TrainLog* log = nullptr);

// Deterministic inference pass (dropout off) up to the fc1 output.
FlowVector img2vec(const CnnModel& m, const img::FlowImage& image);

std::vector<int> cnn_predict(const CnnModel& m, const std::vector<img::FlowImage>& images);

}  // namespace falcon::net
