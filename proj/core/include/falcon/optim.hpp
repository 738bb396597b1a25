#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One accumulator pair per parameter tensor, in registration order.
struct AdamState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  explicit AdamState(AdamConfig config = {}) : cfg(config) {}

  void attach(const std::vector<Tensor*>& params) {
    m.clear();
    v.clear();
    for (const Tensor* p : params) {
      m.emplace_back(p->shape);
      v.emplace_back(p->shape);
    }
    step = 0;
  }
};

// Bias-corrected Adam update, in place.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

// Central finite differences (default h = 1e-5) over every element of every
// parameter tensor. `loss` must re-evaluate the model from the current
// parameter values; `analytic` holds gradients computed at the unperturbed
// point. Relative error metric: |ga - gn| / max(1e-8, |ga| + |gn|).
GradCheckReport grad_check(const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic,
                           const std::function<double()>& loss, double h = 1e-5);

}  // namespace falcon::nn
