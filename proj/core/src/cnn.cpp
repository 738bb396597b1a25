#include "falcon/cnn.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/optim.hpp"

namespace falcon::net {

std::size_t CnnModel::derive_flatten_dim(std::size_t c2, nn::Padding padding) {
  std::size_t side = img::kImageSide;
  side = (padding == nn::Padding::valid) ? side - 2 : side;  // conv1
  side /= 2;                                                 // pool1
  side = (padding == nn::Padding::valid) ? side - 2 : side;  // conv2
  side /= 2;                                                 // pool2
  return side * side * c2;
}

CnnModel CnnModel::init(const CnnConfig& cfg, Rng& rng) {
  CnnModel m;
  m.c1 = cfg.c1;
  m.c2 = cfg.c2;
  m.padding = cfg.padding;
  m.dropout_rate = cfg.dropout_rate;
  m.flatten_dim = derive_flatten_dim(cfg.c2, cfg.padding);
  m.conv1 = nn::Conv2dParams::make(1, cfg.c1);
  m.conv2 = nn::Conv2dParams::make(cfg.c1, cfg.c2);
  m.fc1 = nn::DenseParams::make(m.flatten_dim, kFlowVectorDim);
  m.fc2 = nn::DenseParams::make(kFlowVectorDim, img::kNumClasses);
  m.conv1.init_he_uniform(rng);
  m.conv2.init_he_uniform(rng);
  m.fc1.init_he_uniform(rng);
  m.fc2.init_he_uniform(rng);
  return m;
}

std::vector<nn::Tensor*> CnnModel::parameters() {
  return {&conv1.kernel, &conv1.bias, &conv2.kernel, &conv2.bias,
          &fc1.weight,   &fc1.bias,   &fc2.weight,   &fc2.bias};
}

std::vector<const nn::Tensor*> CnnModel::parameters() const {
  return {&conv1.kernel, &conv1.bias, &conv2.kernel, &conv2.bias,
          &fc1.weight,   &fc1.bias,   &fc2.weight,   &fc2.bias};
}

void CnnModel::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 1.0);  // 1 = cnn
  ckpt.put_scalar("meta.c1", static_cast<double>(c1));
  ckpt.put_scalar("meta.c2", static_cast<double>(c2));
  ckpt.put_scalar("meta.padding", padding == nn::Padding::same ? 1.0 : 0.0);
  ckpt.put_scalar("meta.dropout", dropout_rate);
  ckpt.put("conv1.kernel", conv1.kernel);
  ckpt.put("conv1.bias", conv1.bias);
  ckpt.put("conv2.kernel", conv2.kernel);
  ckpt.put("conv2.bias", conv2.bias);
  ckpt.put("fc1.weight", fc1.weight);
  ckpt.put("fc1.bias", fc1.bias);
  ckpt.put("fc2.weight", fc2.weight);
  ckpt.put("fc2.bias", fc2.bias);
  ckpt.save(path);
}

CnnModel CnnModel::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 1.0)
    fail(errc::schema_error, "checkpoint is not a cnn model: " + path);
  CnnModel m;
  m.c1 = static_cast<std::size_t>(ckpt.get_scalar("meta.c1"));
  m.c2 = static_cast<std::size_t>(ckpt.get_scalar("meta.c2"));
  m.padding = ckpt.get_scalar("meta.padding") == 1.0 ? nn::Padding::same : nn::Padding::valid;
  m.dropout_rate = ckpt.get_scalar("meta.dropout");
  m.flatten_dim = derive_flatten_dim(m.c2, m.padding);
  m.conv1.kernel = ckpt.get("conv1.kernel");
  m.conv1.bias = ckpt.get("conv1.bias");
  m.conv2.kernel = ckpt.get("conv2.kernel");
  m.conv2.bias = ckpt.get("conv2.bias");
  m.fc1.weight = ckpt.get("fc1.weight");
  m.fc1.bias = ckpt.get("fc1.bias");
  m.fc2.weight = ckpt.get("fc2.weight");
  m.fc2.bias = ckpt.get("fc2.bias");
  return m;
}

nn::Tensor images_to_tensor(const std::vector<img::FlowImage>& images) {
  nn::Tensor x({images.size(), img::kImageSide, img::kImageSide, 1});
  std::size_t k = 0;
  for (const auto& image : images)
    for (std::uint8_t px : image.pixels) x.data[k++] = static_cast<double>(px) / 255.0;
  return x;
}

nn::Tensor cnn_forward(const CnnModel& m, const nn::Tensor& x, bool training, Rng* rng,
                       CnnForwardCache* cache) {
  CnnForwardCache local;
  CnnForwardCache& c = cache ? *cache : local;

  c.x = x;
  c.z1 = nn::conv2d_forward(x, m.conv1, m.padding);
  c.a1 = nn::relu(c.z1);
  c.p1 = nn::maxpool2_forward(c.a1);
  c.z2 = nn::conv2d_forward(c.p1.y, m.conv2, m.padding);
  c.a2 = nn::relu(c.z2);
  c.p2 = nn::maxpool2_forward(c.a2);

  const std::size_t n = x.shape[0];
  c.flat = c.p2.y;
  c.flat.shape = {n, m.flatten_dim};
  nn::require(c.flat.numel() == n * m.flatten_dim, errc::shape_mismatch,
              "cnn flatten width mismatch");

  Rng unused_rng(0);
  c.drop = nn::dropout(c.flat, m.dropout_rate, rng ? *rng : unused_rng, training && rng);
  c.y3 = nn::dense_forward(c.drop.y, m.fc1);
  return nn::dense_forward(c.y3, m.fc2);
}

std::vector<nn::Tensor> cnn_backward(const CnnModel& m, const CnnForwardCache& cache,
                                     const nn::Tensor& dlogits) {
  auto g_fc2 = nn::dense_backward(cache.y3, m.fc2, dlogits);
  auto g_fc1 = nn::dense_backward(cache.drop.y, m.fc1, g_fc2.dx);
  nn::Tensor dflat = nn::dropout_backward(cache.drop, g_fc1.dx);
  dflat.shape = cache.p2.y.shape;
  nn::Tensor da2 = nn::maxpool2_backward(cache.a2.shape, cache.p2.argmax, dflat);
  nn::Tensor dz2 = nn::relu_backward(cache.z2, da2);
  auto g_conv2 = nn::conv2d_backward(cache.p1.y, m.conv2, m.padding, dz2);
  nn::Tensor da1 = nn::maxpool2_backward(cache.a1.shape, cache.p1.argmax, g_conv2.dx);
  nn::Tensor dz1 = nn::relu_backward(cache.z1, da1);
  auto g_conv1 = nn::conv2d_backward(cache.x, m.conv1, m.padding, dz1);

  std::vector<nn::Tensor> grads;
  grads.push_back(std::move(g_conv1.dkernel));
  grads.push_back(std::move(g_conv1.dbias));
  grads.push_back(std::move(g_conv2.dkernel));
  grads.push_back(std::move(g_conv2.dbias));
  grads.push_back(std::move(g_fc1.dweight));
  grads.push_back(std::move(g_fc1.dbias));
  grads.push_back(std::move(g_fc2.dweight));
  grads.push_back(std::move(g_fc2.dbias));
  return grads;
}

CnnModel train_cnn(const img::ImageCorpus& corpus, const CnnConfig& cfg, TrainLog* log) {
  if (corpus.images.empty()) fail(errc::empty_corpus, "train_cnn needs a non-empty corpus");
  {
    std::set<std::uint8_t> seen(corpus.labels.begin(), corpus.labels.end());
    if (seen.size() < img::kNumClasses)
      std::cerr << "warning: corpus covers " << seen.size() << " of " << img::kNumClasses
                << " classes\n";
  }

  Rng rng(cfg.seed);
  CnnModel model = CnnModel::init(cfg, rng);

  nn::AdamState adam(nn::AdamConfig{cfg.lr});
  auto params = model.parameters();
  adam.attach(params);

  std::vector<std::size_t> order(corpus.images.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0, batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      std::vector<img::FlowImage> chunk;
      std::vector<int> labels;
      chunk.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        chunk.push_back(corpus.images[order[k]]);
        labels.push_back(static_cast<int>(corpus.labels[order[k]]));
      }
      const nn::Tensor x = images_to_tensor(chunk);
      CnnForwardCache cache;
      const nn::Tensor logits = cnn_forward(model, x, true, &rng, &cache);
      const auto ce = nn::sparse_ce_loss(logits, labels);
      loss_sum += ce.loss;
      ++batches;
      for (std::size_t b = 0; b < labels.size(); ++b) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < img::kNumClasses; ++k)
          if (logits.at2(b, k) > logits.at2(b, arg)) arg = k;
        if (static_cast<int>(arg) == labels[b]) ++hits;
      }
      const auto grads = cnn_backward(model, cache, ce.dlogits);
      std::vector<const nn::Tensor*> gptrs;
      for (const auto& g : grads) gptrs.push_back(&g);
      nn::adam_step(params, gptrs, adam);
    }
    if (log)
      log->push_back(EpochStats{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0,
                                static_cast<double>(hits) / static_cast<double>(order.size())});
  }
  return model;
}

FlowVector img2vec(const CnnModel& m, const img::FlowImage& image) {
  const nn::Tensor x = images_to_tensor({image});
  CnnForwardCache cache;
  cnn_forward(m, x, false, nullptr, &cache);
  return FlowVector(cache.y3.data.begin(), cache.y3.data.end());
}

std::vector<int> cnn_predict(const CnnModel& m, const std::vector<img::FlowImage>& images) {
  std::vector<int> preds;
  preds.reserve(images.size());
  const std::size_t chunk_size = 64;
  for (std::size_t begin = 0; begin < images.size(); begin += chunk_size) {
    const std::size_t end = std::min(images.size(), begin + chunk_size);
    std::vector<img::FlowImage> chunk(images.begin() + static_cast<std::ptrdiff_t>(begin),
                                      images.begin() + static_cast<std::ptrdiff_t>(end));
    const nn::Tensor logits = cnn_forward(m, images_to_tensor(chunk), false, nullptr, nullptr);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < img::kNumClasses; ++k)
        if (logits.at2(b, k) > logits.at2(b, arg)) arg = k;
      preds.push_back(static_cast<int>(arg));
    }
  }
  return preds;
}

}  // namespace falcon::net
