#include "shadow/optim.hpp"

#include <cmath>

namespace shadow::nn {

AdamW::AdamW(ParamList params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double step_size = cfg_.lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    auto w = p.data();
    const bool has = p.has_grad();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      w[j] *= 1.0 - cfg_.lr * cfg_.weight_decay;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double denom = std::sqrt(v[j]) / sqrt_bc2 + cfg_.eps;
      w[j] -= step_size * m[j] / denom;
    }
  }
}

double grad_norm(const ParamList& params) {
  double s = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) s += g * g;
  }
  return std::sqrt(s);
}

double clip_grad_norm(ParamList& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.grad()) g *= k;
    }
  }
  return norm;
}

}  // namespace shadow::nn
