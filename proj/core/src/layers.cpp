#include "falcon/layers.hpp"

#include <algorithm>
#include <cmath>

namespace falcon::nn {

Conv2dParams Conv2dParams::make(std::size_t in_ch, std::size_t out_ch) {
  Conv2dParams p;
  p.kernel = Tensor({3, 3, in_ch, out_ch});
  p.bias = Tensor({out_ch});
  return p;
}

void Conv2dParams::init_he_uniform(Rng& rng) {
  const double fan_in = 3.0 * 3.0 * static_cast<double>(kernel.shape[2]);
  const double limit = std::sqrt(6.0 / fan_in);
  for (double& w : kernel.data) w = rng.uniform(-limit, limit);
  bias.fill(0.0);
}

DenseParams DenseParams::make(std::size_t in, std::size_t out) {
  DenseParams p;
  p.weight = Tensor({in, out});
  p.bias = Tensor({out});
  return p;
}

void DenseParams::init_he_uniform(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(weight.shape[0]));
  for (double& w : weight.data) w = rng.uniform(-limit, limit);
  bias.fill(0.0);
}

void DenseParams::init_glorot_uniform(Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(weight.shape[0] + weight.shape[1]));
  for (double& w : weight.data) w = rng.uniform(-limit, limit);
  bias.fill(0.0);
}

Tensor conv2d_forward(const Tensor& x, const Conv2dParams& p, Padding padding) {
  require(x.shape.size() == 4, errc::shape_mismatch, "conv2d input must be [N,H,W,C]");
  require(p.kernel.shape.size() == 4 && p.kernel.shape[0] == 3 && p.kernel.shape[1] == 3,
          errc::shape_mismatch, "conv2d kernel must be [3,3,Cin,Cout]");
  require(x.shape[3] == p.kernel.shape[2], errc::shape_mismatch,
          "conv2d input channels do not match kernel");
  const std::size_t n = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3];
  const std::size_t cout = p.kernel.shape[3];
  const bool same = padding == Padding::same;
  require(same || (h >= 3 && w >= 3), errc::shape_mismatch, "conv2d valid needs H,W >= 3");
  const std::size_t oh = same ? h : h - 2;
  const std::size_t ow = same ? w : w - 2;
  const std::ptrdiff_t off = same ? -1 : 0;

  Tensor y({n, oh, ow, cout});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t o = 0; o < cout; ++o) {
          double acc = p.bias[o];
          for (std::size_t ki = 0; ki < 3; ++ki) {
            const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(i + ki) + off;
            if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kj = 0; kj < 3; ++kj) {
              const std::ptrdiff_t xj = static_cast<std::ptrdiff_t>(j + kj) + off;
              if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(w)) continue;
              const double* xp =
                  &x.data[((b * h + static_cast<std::size_t>(xi)) * w +
                           static_cast<std::size_t>(xj)) * cin];
              const double* kp = &p.kernel.data[((ki * 3 + kj) * cin) * cout + o];
              for (std::size_t c = 0; c < cin; ++c) acc += xp[c] * kp[c * cout];
            }
          }
          y.data[((b * oh + i) * ow + j) * cout + o] = acc;
        }
      }
    }
  }
  return y;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Conv2dParams& p, Padding padding,
                            const Tensor& dy) {
  const std::size_t n = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3];
  const std::size_t cout = p.kernel.shape[3];
  const bool same = padding == Padding::same;
  const std::size_t oh = same ? h : h - 2;
  const std::size_t ow = same ? w : w - 2;
  dy.require_shape({n, oh, ow, cout}, "conv2d_backward dy shape");
  const std::ptrdiff_t off = same ? -1 : 0;

  Conv2dGrads g;
  g.dkernel = Tensor(p.kernel.shape);
  g.dbias = Tensor(p.bias.shape);
  g.dx = Tensor(x.shape);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double* dyp = &dy.data[((b * oh + i) * ow + j) * cout];
        for (std::size_t o = 0; o < cout; ++o) g.dbias[o] += dyp[o];
        for (std::size_t ki = 0; ki < 3; ++ki) {
          const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(i + ki) + off;
          if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < 3; ++kj) {
            const std::ptrdiff_t xj = static_cast<std::ptrdiff_t>(j + kj) + off;
            if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t xbase = ((b * h + static_cast<std::size_t>(xi)) * w +
                                       static_cast<std::size_t>(xj)) * cin;
            const std::size_t kbase = ((ki * 3 + kj) * cin) * cout;
            for (std::size_t c = 0; c < cin; ++c) {
              const double xv = x.data[xbase + c];
              double dxacc = 0.0;
              for (std::size_t o = 0; o < cout; ++o) {
                g.dkernel.data[kbase + c * cout + o] += xv * dyp[o];
                dxacc += p.kernel.data[kbase + c * cout + o] * dyp[o];
              }
              g.dx.data[xbase + c] += dxacc;
            }
          }
        }
      }
    }
  }
  return g;
}

MaxPoolResult maxpool2_forward(const Tensor& x) {
  require(x.shape.size() == 4, errc::shape_mismatch, "maxpool input must be [N,H,W,C]");
  const std::size_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
  require(h >= 2 && w >= 2, errc::shape_mismatch, "maxpool needs H,W >= 2");
  const std::size_t oh = h / 2, ow = w / 2;

  MaxPoolResult r;
  r.y = Tensor({n, oh, ow, c});
  r.argmax.resize(r.y.numel());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          double best = -1e308;
          std::size_t best_idx = 0;
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
              if (x.data[idx] > best) {
                best = x.data[idx];
                best_idx = idx;
              }
            }
          }
          const std::size_t out_idx = ((b * oh + i) * ow + j) * c + ch;
          r.y.data[out_idx] = best;
          r.argmax[out_idx] = best_idx;
        }
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const std::vector<std::size_t>& x_shape,
                         const std::vector<std::size_t>& argmax, const Tensor& dy) {
  require(dy.numel() == argmax.size(), errc::shape_mismatch, "maxpool backward dy shape");
  Tensor dx(x_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx.data[argmax[i]] += dy.data[i];
  return dx;
}

Tensor dense_forward(const Tensor& x, const DenseParams& p) {
  require(x.shape.size() == 2, errc::shape_mismatch, "dense input must be [N,In]");
  require(x.shape[1] == p.weight.shape[0], errc::shape_mismatch,
          "dense input width does not match weight");
  const std::size_t n = x.shape[0], in = x.shape[1], out = p.weight.shape[1];
  Tensor y({n, out});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out; ++o) y.at2(b, o) = p.bias[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x.at2(b, i);
      if (xv == 0.0) continue;
      const double* wp = &p.weight.data[i * out];
      double* yp = &y.data[b * out];
      for (std::size_t o = 0; o < out; ++o) yp[o] += xv * wp[o];
    }
  }
  return y;
}

DenseGrads dense_backward(const Tensor& x, const DenseParams& p, const Tensor& dy) {
  const std::size_t n = x.shape[0], in = x.shape[1], out = p.weight.shape[1];
  dy.require_shape({n, out}, "dense_backward dy shape");
  DenseGrads g;
  g.dweight = Tensor(p.weight.shape);
  g.dbias = Tensor(p.bias.shape);
  g.dx = Tensor(x.shape);
  for (std::size_t b = 0; b < n; ++b) {
    const double* dyp = &dy.data[b * out];
    for (std::size_t o = 0; o < out; ++o) g.dbias[o] += dyp[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = x.at2(b, i);
      const double* wp = &p.weight.data[i * out];
      double* dwp = &g.dweight.data[i * out];
      double dxacc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        dwp[o] += xv * dyp[o];
        dxacc += wp[o] * dyp[o];
      }
      g.dx.at2(b, i) = dxacc;
    }
  }
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require(x.numel() == dy.numel(), errc::shape_mismatch, "relu backward shape");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.numel(); ++i)
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  return dx;
}

Tensor tanh_map(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data) v = std::tanh(v);
  return y;
}

Tensor softmax(const Tensor& logits) {
  require(logits.shape.size() == 2, errc::shape_mismatch, "softmax input must be [N,K]");
  const std::size_t n = logits.shape[0], k = logits.shape[1];
  Tensor y(logits.shape);
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = &logits.data[b * k];
    double mx = row[0];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double e = std::exp(row[i] - mx);
      y.data[b * k + i] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < k; ++i) y.data[b * k + i] /= sum;
  }
  return y;
}

DropoutResult dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  require(rate >= 0.0 && rate < 1.0, errc::bad_hyperparameters, "dropout rate must be in [0,1)");
  DropoutResult r;
  r.rate = rate;
  r.y = x;
  r.keep.assign(x.numel(), 1);
  if (!training || rate == 0.0) return r;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (rng.uniform() < rate) {
      r.keep[i] = 0;
      r.y.data[i] = 0.0;
    } else {
      r.y.data[i] *= scale;
    }
  }
  return r;
}

Tensor dropout_backward(const DropoutResult& cache, const Tensor& dy) {
  require(cache.keep.size() == dy.numel(), errc::shape_mismatch, "dropout backward shape");
  Tensor dx = dy;
  const double scale = 1.0 / (1.0 - cache.rate);
  for (std::size_t i = 0; i < dx.numel(); ++i)
    dx.data[i] = cache.keep[i] ? dx.data[i] * scale : 0.0;
  return dx;
}

CeResult sparse_ce_loss(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.shape.size() == 2, errc::shape_mismatch, "loss input must be [N,K]");
  const std::size_t n = logits.shape[0], k = logits.shape[1];
  require(labels.size() == n, errc::length_mismatch, "labels length must match batch");
  for (int label : labels)
    require(label >= 0 && static_cast<std::size_t>(label) < k, errc::label_out_of_range,
            "label outside logit width");

  CeResult r;
  r.dlogits = softmax(logits);
  for (std::size_t b = 0; b < n; ++b) {
    const double p = r.dlogits.at2(b, static_cast<std::size_t>(labels[b]));
    r.loss -= std::log(std::max(p, 1e-300));
  }
  r.loss /= static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    r.dlogits.at2(b, static_cast<std::size_t>(labels[b])) -= 1.0;
  }
  for (double& v : r.dlogits.data) v /= static_cast<double>(n);
  return r;
}

}  // namespace falcon::nn
