#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "shadow/optim.hpp"

using namespace shadow::nn;

namespace {

void set_grad(Tensor& t, std::vector<double> g) { t.node()->grad = std::move(g); }

// Plain Adam on a flat vector, written out step by step.
struct ReferenceAdam {
  double lr, b1, b2, eps;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& w, const std::vector<double>& g) {
    ++t;
    if (m.empty()) m.assign(w.size(), 0.0), v.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace

TEST(AdamW, ZeroGradientWithoutDecayLeavesParams) {
  Tensor w = Tensor::from({3}, {1, -2, 3}, true);
  AdamW opt({{"w", w}}, {.lr = 0.1, .weight_decay = 0.0});
  set_grad(w, {0, 0, 0});
  for (int i = 0; i < 5; ++i) opt.step();
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()), (std::vector<double>{1, -2, 3}));
}

TEST(AdamW, FirstStepByHand) {
  Tensor w = Tensor::from({1}, {2.0}, true);
  AdamW opt({{"w", w}}, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.01});
  set_grad(w, {0.5});
  opt.step();
  // decay: 2 * (1 - 0.001) = 1.998; bias-corrected m/sqrt(v) = 0.5 / 0.5 = 1
  EXPECT_NEAR(w.data()[0], 1.998 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(AdamW, WithoutDecayMatchesReferenceAdam) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> init(10);
  for (double& x : init) x = g(rng);
  Tensor w = Tensor::from({10}, init, true);
  AdamW opt({{"w", w}}, {.lr = 0.01, .weight_decay = 0.0});
  ReferenceAdam ref{0.01, 0.9, 0.999, 1e-8};
  std::vector<double> rw = init;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> grad(10);
    for (double& x : grad) x = g(rng);
    set_grad(w, grad);
    opt.step();
    ref.step(rw, grad);
  }
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(w.data()[i], rw[i], 1e-12);
}

TEST(AdamW, MissingGradientCountsAsZero) {
  Tensor w = Tensor::from({2}, {1, 1}, true);
  AdamW opt({{"w", w}}, {.lr = 0.1, .weight_decay = 0.5});
  opt.step();
  EXPECT_NEAR(w.data()[0], 0.95, 1e-15);
}

TEST(ClipGradNorm, Examples) {
  Tensor a = Tensor::from({2}, {0, 0}, true);
  ParamList p{{"a", a}};
  set_grad(a, {0.3, 0.4});
  EXPECT_DOUBLE_EQ(clip_grad_norm(p, 1.0), 0.5);
  EXPECT_EQ(a.grad()[0], 0.3);
  EXPECT_EQ(a.grad()[1], 0.4);

  set_grad(a, {2.4, 3.2});
  EXPECT_DOUBLE_EQ(clip_grad_norm(p, 1.0), 4.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(a.grad()[1], 0.8, 1e-15);

  set_grad(a, {0, 0});
  EXPECT_EQ(clip_grad_norm(p, 1.0), 0.0);
  EXPECT_EQ(a.grad()[0], 0.0);
}

TEST(ClipGradNorm, GlobalAcrossTensors) {
  Tensor a = Tensor::from({1}, {0}, true);
  Tensor b = Tensor::from({1}, {0}, true);
  ParamList p{{"a", a}, {"b", b}};
  set_grad(a, {3.0});
  set_grad(b, {4.0});
  EXPECT_DOUBLE_EQ(grad_norm(p), 5.0);
  clip_grad_norm(p, 1.0);
  EXPECT_NEAR(grad_norm(p), 1.0, 1e-15);
}
