#pragma once

#include <cstdint>
#include <vector>

#include "shadow/nn.hpp"

namespace shadow::nn {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Parameters without a gradient buffer are
/// treated as having a zero gradient.
class AdamW {
 public:
  AdamW() = default;
  AdamW(ParamList params, AdamWConfig cfg);

  void step();
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamWConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  /// Moment buffers, one per parameter, for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParamList params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

/// Global L2 norm of all gradients.
double grad_norm(const ParamList& params);

/// Scales every gradient by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm before clipping.
double clip_grad_norm(ParamList& params, double max_norm);

}  // namespace shadow::nn
