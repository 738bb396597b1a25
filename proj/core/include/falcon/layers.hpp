#pragma once

#include <vector>

#include "falcon/rng.hpp"
#include "falcon/tensor.hpp"

namespace falcon::nn {

enum class Padding { valid, same };

// 3x3 convolution parameters: kernel [3,3,Cin,Cout], bias [Cout].
struct Conv2dParams {
  Tensor kernel;
  Tensor bias;

  static Conv2dParams make(std::size_t in_ch, std::size_t out_ch);
  void init_he_uniform(Rng& rng);
};

// Fully connected parameters: weight [In,Out], bias [Out].
struct DenseParams {
  Tensor weight;
  Tensor bias;

  static DenseParams make(std::size_t in, std::size_t out);
  void init_he_uniform(Rng& rng);
  void init_glorot_uniform(Rng& rng);
};

// x is [N,H,W,Cin]; valid shrinks H and W by 2, same keeps them (zero pad).
Tensor conv2d_forward(const Tensor& x, const Conv2dParams& p, Padding padding);

struct Conv2dGrads {
  Tensor dkernel;
  Tensor dbias;
  Tensor dx;
};
Conv2dGrads conv2d_backward(const Tensor& x, const Conv2dParams& p, Padding padding,
                            const Tensor& dy);

// Non-overlapping 2x2 max pool, stride 2, trailing odd row/col dropped.
// argmax holds the flat input index that won each window (first maximum in
// row-major order on ties) so the backward pass is deterministic.
struct MaxPoolResult {
  Tensor y;
  std::vector<std::size_t> argmax;
};
MaxPoolResult maxpool2_forward(const Tensor& x);
Tensor maxpool2_backward(const std::vector<std::size_t>& x_shape,
                         const std::vector<std::size_t>& argmax, const Tensor& dy);

Tensor dense_forward(const Tensor& x, const DenseParams& p);

struct DenseGrads {
  Tensor dweight;
  Tensor dbias;
  Tensor dx;
};
DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

Tensor tanh_map(const Tensor& x);

// Row softmax with max subtraction.
Tensor softmax(const Tensor& logits);

// Inverted dropout: training zeroes units with probability `rate` and scales
// survivors by 1/(1-rate); inference is the identity.
struct DropoutResult {
  Tensor y;
  std::vector<std::uint8_t> keep;
  double rate = 0.0;
};
DropoutResult dropout(const Tensor& x, double rate, Rng& rng, bool training);
Tensor dropout_backward(const DropoutResult& cache, const Tensor& dy);

struct CeResult {
  double loss = 0.0;
  Tensor dlogits;
};
// Mean negative log-likelihood over the batch; gradient (softmax - onehot)/N.
CeResult sparse_ce_loss(const Tensor& logits, const std::vector<int>& labels);

}  // namespace falcon::nn
