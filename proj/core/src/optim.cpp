#include "falcon/optim.hpp"

#include <cmath>

namespace falcon::nn {

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          errc::shape_mismatch, "adam_step parameter/grad/state counts differ");
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    const Tensor& grad = *grads[p];
    require(param.numel() == grad.numel(), errc::shape_mismatch, "adam_step grad shape");
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const double g = grad.data[i];
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g;
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g * g;
      const double mhat = m.data[i] / c1;
      const double vhat = v.data[i] / c2;
      param.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

GradCheckReport grad_check(const std::vector<Tensor*>& params,
                           const std::vector<const Tensor*>& analytic,
                           const std::function<double()>& loss, double h) {
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    const Tensor& ga = *analytic[p];
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const double saved = param.data[i];
      param.data[i] = saved + h;
      const double lp = loss();
      param.data[i] = saved - h;
      const double lm = loss();
      param.data[i] = saved;
      const double gn = (lp - lm) / (2.0 * h);
      const double rel =
          std::abs(ga.data[i] - gn) / std::max(1e-8, std::abs(ga.data[i]) + std::abs(gn));
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace falcon::nn
