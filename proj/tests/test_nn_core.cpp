#include <doctest.h>

#include <cmath>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/layers.hpp"
#include "falcon/optim.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/tiny_models.hpp"

using namespace falcon;
using nn::Tensor;

TEST_CASE("conv2d: zero kernel on a 3x3 input gives a zero 1x1 output") {
  Tensor x({1, 3, 3, 1});
  for (std::size_t i = 0; i < 9; ++i) x.data[i] = static_cast<double>(i);
  const auto p = nn::Conv2dParams::make(1, 1);
  const Tensor y = nn::conv2d_forward(x, p, nn::Padding::valid);
  REQUIRE(y.shape == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(y[0] == 0.0);
}

TEST_CASE("conv2d: identity kernel with same padding reproduces the input") {
  Rng rng(3);
  Tensor x({2, 5, 5, 1});
  for (double& v : x.data) v = rng.uniform(-1, 1);
  auto p = nn::Conv2dParams::make(1, 1);
  p.kernel.at4(1, 1, 0, 0) = 1.0;  // center tap
  const Tensor y = nn::conv2d_forward(x, p, nn::Padding::same);
  REQUIRE(y.shape == x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("conv2d: random inputs match the six-loop oracle in both paddings") {
  Rng rng(11);
  for (const bool same : {false, true}) {
    Tensor x({2, 5, 5, 3});
    for (double& v : x.data) v = rng.uniform(-1, 1);
    auto p = nn::Conv2dParams::make(3, 4);
    for (double& v : p.kernel.data) v = rng.uniform(-1, 1);
    for (double& v : p.bias.data) v = rng.uniform(-1, 1);
    const Tensor y = nn::conv2d_forward(x, p, same ? nn::Padding::same : nn::Padding::valid);
    const Tensor ref = oracles::conv2d_naive(x, p.kernel, p.bias, same);
    REQUIRE(y.shape == ref.shape);
    for (std::size_t i = 0; i < y.numel(); ++i)
      CHECK(std::abs(y.data[i] - ref.data[i]) < 1e-12);
  }
}

TEST_CASE("conv2d: channel mismatch raises ShapeMismatch") {
  Tensor x({1, 4, 4, 2});
  const auto p = nn::Conv2dParams::make(3, 1);
  CHECK_THROWS_WITH_AS(nn::conv2d_forward(x, p, nn::Padding::valid),
                       doctest::Contains("ShapeMismatch"), falcon::error);
}

TEST_CASE("maxpool2: window, ties and odd trailing edges") {
  Tensor x({1, 2, 2, 1});
  x.data = {1, 2, 3, 4};
  const auto r = nn::maxpool2_forward(x);
  REQUIRE(r.y.shape == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(r.y[0] == 4.0);
  CHECK(r.argmax[0] == 3);

  Tensor flat({1, 4, 4, 1});
  flat.fill(7.0);
  const auto c = nn::maxpool2_forward(flat);
  CHECK(c.y.numel() == 4);
  for (double v : c.y.data) CHECK(v == 7.0);
  CHECK(c.argmax[0] == 0);  // first maximum in row-major order

  Tensor odd({1, 5, 5, 1});
  const auto o = nn::maxpool2_forward(odd);
  CHECK(o.y.shape == std::vector<std::size_t>{1, 2, 2, 1});
}

TEST_CASE("maxpool2 backward routes gradient to the argmax") {
  Tensor x({1, 2, 2, 1});
  x.data = {1, 9, 3, 4};
  const auto r = nn::maxpool2_forward(x);
  Tensor dy({1, 1, 1, 1});
  dy[0] = 5.0;
  const Tensor dx = nn::maxpool2_backward(x.shape, r.argmax, dy);
  CHECK(dx.data == std::vector<double>{0, 5, 0, 0});
}

TEST_CASE("dense matches the naive oracle") {
  Rng rng(17);
  Tensor x({3, 7});
  for (double& v : x.data) v = rng.uniform(-1, 1);
  auto p = nn::DenseParams::make(7, 4);
  for (double& v : p.weight.data) v = rng.uniform(-1, 1);
  for (double& v : p.bias.data) v = rng.uniform(-1, 1);
  const Tensor y = nn::dense_forward(x, p);
  const Tensor ref = oracles::dense_naive(x, p.weight, p.bias);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.data[i] - ref.data[i]) < 1e-12);
}

TEST_CASE("relu and softmax basics") {
  Tensor x({1, 3});
  x.data = {-1, 0, 2};
  const Tensor y = nn::relu(x);
  CHECK(y.data == std::vector<double>{0, 0, 2});

  Tensor logits({1, 5});
  const Tensor p = nn::softmax(logits);
  for (double v : p.data) CHECK(v == doctest::Approx(0.2));

  Rng rng(23);
  Tensor wide({4, 9});
  for (double& v : wide.data) v = rng.uniform(-30, 30);
  const Tensor q = nn::softmax(wide);
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      CHECK(q.at2(r, c) > 0.0);
      CHECK(q.at2(r, c) < 1.0);
      sum += q.at2(r, c);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("dropout: rate zero is the identity in both modes") {
  Rng rng(5);
  Tensor x({2, 8});
  for (double& v : x.data) v = rng.uniform(-1, 1);
  for (const bool training : {false, true}) {
    const auto r = nn::dropout(x, 0.0, rng, training);
    CHECK(r.y.data == x.data);
  }
}

TEST_CASE("dropout: training zeroes and rescales, inference passes through") {
  Rng rng(6);
  Tensor x({1, 10000});
  x.fill(1.0);
  const auto r = nn::dropout(x, 0.5, rng, true);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (r.keep[i]) {
      CHECK(r.y.data[i] == doctest::Approx(2.0));
      ++kept;
    } else {
      CHECK(r.y.data[i] == 0.0);
    }
  }
  CHECK(kept > 4700);
  CHECK(kept < 5300);

  const auto inference = nn::dropout(x, 0.5, rng, false);
  CHECK(inference.y.data == x.data);

  CHECK_THROWS_AS(nn::dropout(x, 1.0, rng, true), falcon::error);
}

TEST_CASE("sparse_ce_loss: uniform logits cost ln K") {
  Tensor logits({3, 5});
  const auto r = nn::sparse_ce_loss(logits, {0, 3, 4});
  CHECK(r.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("sparse_ce_loss: confident correct logit drives the loss to zero") {
  Tensor logits({1, 5});
  logits.at2(0, 2) = 60.0;
  const auto r = nn::sparse_ce_loss(logits, {2});
  CHECK(r.loss < 1e-12);
}

TEST_CASE("sparse_ce_loss: label out of range") {
  Tensor logits({1, 3});
  CHECK_THROWS_WITH_AS(nn::sparse_ce_loss(logits, {3}), doctest::Contains("LabelOutOfRange"),
                       falcon::error);
}

TEST_CASE("sparse_ce_loss: gradient matches central differences") {
  Rng rng(31);
  Tensor logits({2, 5});
  for (double& v : logits.data) v = rng.uniform(-2, 2);
  const std::vector<int> labels = {1, 4};

  const auto ce = nn::sparse_ce_loss(logits, labels);
  std::vector<nn::Tensor*> params = {&logits};
  std::vector<const nn::Tensor*> analytic = {&ce.dlogits};
  const auto report = nn::grad_check(
      params, analytic, [&] { return nn::sparse_ce_loss(logits, labels).loss; }, 1e-5);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor w({3});
  w.data = {1.0, -2.0, 0.5};
  Tensor g({3});
  nn::AdamState state;
  state.attach({&w});
  const auto before = w.data;
  nn::adam_step({&w}, {&g}, state);
  CHECK(w.data == before);
}

TEST_CASE("adam: first step moves a scalar by about the learning rate") {
  Tensor w({1});
  w[0] = 1.0;
  Tensor g({1});
  g[0] = 1.0;
  nn::AdamState state;  // defaults: lr 0.001, beta1 0.9, beta2 0.999, eps 1e-8
  state.attach({&w});
  nn::adam_step({&w}, {&g}, state);
  CHECK(w[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-5));
}

TEST_CASE("grad_check: linear model is exact to near machine precision") {
  // loss = sum(w * x), gradient is x itself.
  Rng rng(41);
  Tensor w({6});
  Tensor x({6});
  for (double& v : w.data) v = rng.uniform(-1, 1);
  for (double& v : x.data) v = rng.uniform(-1, 1);
  Tensor analytic = x;
  std::vector<nn::Tensor*> params = {&w};
  std::vector<const nn::Tensor*> grads = {&analytic};
  const auto report = nn::grad_check(
      params, grads,
      [&] {
        double s = 0;
        for (std::size_t i = 0; i < 6; ++i) s += w[i] * x[i];
        return s;
      },
      1e-5);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("grad_check: tiny cnn passes at 1e-4") {
  tiny::TinyCnn model(2024);
  CHECK(tiny::run_grad_check(model) < 1e-4);
}

TEST_CASE("checkpoint: bit-exact round trip with scalars and tensors") {
  fixtures::TempDir tmp("ckpt");
  Rng rng(55);
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 9.0);
  Tensor w({4, 3});
  for (double& v : w.data) v = rng.normal();
  ckpt.put("layer.weight", w);
  Tensor odd({7});
  odd.data = {0.1, -0.0, 1e-300, 1e300, 3.141592653589793, -2.5, 0.0};
  ckpt.put("odd", odd);
  ckpt.save(tmp.file("m.ckpt"));

  const auto back = nn::Checkpoint::load(tmp.file("m.ckpt"));
  CHECK(back.get_scalar("meta.kind") == 9.0);
  CHECK(back.get("layer.weight").shape == w.shape);
  CHECK(back.get("layer.weight").data == w.data);
  CHECK(back.get("odd").data == odd.data);
  CHECK(back.has("odd"));
  CHECK_FALSE(back.has("missing"));
  CHECK_THROWS_WITH_AS(back.get("missing"), doctest::Contains("SchemaError"), falcon::error);

  // a second save is byte-identical
  back.save(tmp.file("m2.ckpt"));
  CHECK(read_file(tmp.file("m.ckpt")) == read_file(tmp.file("m2.ckpt")));
}

TEST_CASE("checkpoint: foreign bytes are rejected") {
  fixtures::TempDir tmp("ckpt-bad");
  write_file(tmp.file("junk.ckpt"), Bytes{0x00, 0x01, 0x02});
  CHECK_THROWS_WITH_AS(nn::Checkpoint::load(tmp.file("junk.ckpt")),
                       doctest::Contains("BadMagic"), falcon::error);
}
