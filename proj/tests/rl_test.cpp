#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shadow/error.hpp"
#include "shadow/rl.hpp"

using namespace shadow;

namespace {

using Bytes = std::vector<std::uint8_t>;

std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v, const std::vector<double>& last,
                        const Bytes& done, const std::vector<double>& boot, std::size_t T, std::size_t N,
                        double gamma = 0.99, double lambda = 0.95) {
  return compute_gae(r, v, last, done, boot, T, N, gamma, lambda);
}

}  // namespace

TEST(ComputeGae, SingleTerminalStep) {
  const auto a = gae({1.0}, {0.0}, {5.0}, {1}, {0.0}, 1, 1);
  EXPECT_EQ(a[0], 1.0);
}

TEST(ComputeGae, TwoStepExample) {
  const auto a = gae({1, 1}, {0, 0}, {0}, {0, 0}, {0, 0}, 2, 1);
  EXPECT_NEAR(a[1], 1.0, 1e-15);
  EXPECT_NEAR(a[0], 1.9405, 1e-12);
}

TEST(ComputeGae, ThreeStepExample) {
  const auto a = gae({1, 1, 1}, {0, 0, 0}, {0}, {0, 0, 0}, {0, 0, 0}, 3, 1);
  EXPECT_NEAR(a[1], 1.9405, 1e-12);
  EXPECT_NEAR(a[0], 2.82504025, 1e-8);
  EXPECT_NEAR(a[0], 2.82504, 1e-5);
}

TEST(ComputeGae, ZeroLambdaGivesTdError) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t T = 6, N = 3;
  std::vector<double> r(T * N), v(T * N), last(N), boot(T * N, 0.0);
  for (double& x : r) x = g(rng);
  for (double& x : v) x = g(rng);
  for (double& x : last) x = g(rng);
  Bytes done(T * N, 0);
  done[4] = 1;
  const auto a = gae(r, v, last, done, boot, T, N, 0.9, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = t * N + n;
      const double next = done[i] ? 0.0 : (t + 1 < T ? v[i + N] : last[n]);
      EXPECT_NEAR(a[i], r[i] + 0.9 * next - v[i], 1e-14);
    }
  }
}

TEST(ComputeGae, MatchesBruteForceSums) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution ends(0.2), trunc(0.5);
  std::uniform_int_distribution<std::size_t> len(1, 8), width(1, 5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t T = len(rng), N = width(rng);
    std::vector<double> r(T * N), v(T * N), last(N), boot(T * N, 0.0);
    Bytes done(T * N, 0);
    for (double& x : r) x = g(rng);
    for (double& x : v) x = g(rng);
    for (double& x : last) x = g(rng);
    for (std::size_t i = 0; i < T * N; ++i) {
      if (ends(rng)) {
        done[i] = 1;
        if (trunc(rng)) boot[i] = g(rng);
      }
    }
    const auto got = gae(r, v, last, done, boot, T, N);
    const auto want = oracle::gae_brute_force(r, v, last, done, boot, T, N, 0.99, 0.95);
    for (std::size_t i = 0; i < T * N; ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
  }
}

TEST(ComputeGae, TruncationBootstrapPropagates) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t T = 8, k = 5;
  const double gamma = 0.99, lambda = 0.95, boot_v = 2.5;
  std::vector<double> r(T), v(T), last{g(rng)};
  for (double& x : r) x = g(rng);
  for (double& x : v) x = g(rng);
  Bytes done(T, 0);
  done[k] = 1;
  std::vector<double> none(T, 0.0), with = none;
  with[k] = boot_v;
  const auto a0 = gae(r, v, last, done, none, T, 1, gamma, lambda);
  const auto a1 = gae(r, v, last, done, with, T, 1, gamma, lambda);
  for (std::size_t t = 0; t < T; ++t) {
    const double want = t <= k ? std::pow(gamma * lambda, double(k - t)) * gamma * boot_v : 0.0;
    EXPECT_NEAR(a1[t] - a0[t], want, 1e-12);
  }
}

TEST(ComputeGae, ShapeMismatchThrows) {
  EXPECT_THROW(gae({1, 1}, {0}, {0}, {0, 0}, {0, 0}, 2, 1), DimensionError);
  EXPECT_THROW(gae({1, 1}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, 2, 1), DimensionError);
}

TEST(TdTargets, ThreeStepToy) {
  // step 0 continues, step 1 terminates, step 2 is truncated with V(s_final) = 4
  const std::vector<double> r{1, 2, 3}, v{10, 20, 30}, last{40}, boot{0, 0, 4};
  const Bytes done{0, 1, 1};
  const auto t = td_targets(r, v, last, done, boot, 3, 1, 0.5);
  EXPECT_EQ(t[0], 1 + 0.5 * 20);
  EXPECT_EQ(t[1], 2.0);
  EXPECT_EQ(t[2], 3 + 0.5 * 4);
}

TEST(MixAdvantages, HandExample) {
  const std::vector<double> w{1, 0, 0};
  const auto m = mix_advantages({{1, 3}, {5, 9}, {2, 2}}, w);
  EXPECT_NEAR(m[0], -1.0, 1e-7);
  EXPECT_NEAR(m[1], 1.0, 1e-7);
}

TEST(MixAdvantages, ConstantStreamsGiveZero) {
  const std::vector<double> w{0.7, 0.1, 0.2};
  const auto m = mix_advantages({{4, 4, 4}, {-1, -1, -1}, {0, 0, 0}}, w);
  for (double x : m) EXPECT_EQ(x, 0.0);
}

TEST(MixAdvantages, AffineInvariantPerStream) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  const std::vector<double> w{0.7, 0.1, 0.2};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> s(3, std::vector<double>(64));
    for (auto& v : s) {
      for (double& x : v) x = g(rng);
    }
    const auto base = mix_advantages(s, w, 0.0);
    const double a = scale(rng), b = 5.0 * g(rng);
    for (double& x : s[trial % 3]) x = a * x + b;
    const auto moved = mix_advantages(s, w, 0.0);
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(moved[i], base[i], 1e-9);
  }
}

TEST(MixAdvantages, EpsilonGuardDeviationIsBounded) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<double> w{0.7, 0.1, 0.2};
  const double eps = 1e-8;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> s(3, std::vector<double>(64));
    for (auto& v : s) {
      for (double& x : v) x = g(rng);
    }
    const auto exact = mix_advantages(s, w, 0.0);
    const auto guarded = mix_advantages(s, w, eps);
    double bound = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto [mu, sd] = mean_std(s[k]);
      double zmax = 0.0;
      for (double x : s[k]) zmax = std::max(zmax, std::abs(x - mu) / sd);
      bound += w[k] * zmax * eps / sd;
    }
    for (std::size_t i = 0; i < exact.size(); ++i) EXPECT_LE(std::abs(guarded[i] - exact[i]), bound * 1.01 + 1e-15);
  }
}

TEST(MixAdvantages, MismatchThrows) {
  const std::vector<double> w{1, 0};
  EXPECT_THROW(mix_advantages({{1, 2}, {1, 2}, {1, 2}}, w), DimensionError);
  const std::vector<double> w3{1, 0, 0};
  EXPECT_THROW(mix_advantages({{1, 2}, {1}, {1, 2}}, w3), DimensionError);
}

TEST(MeanStd, Population) {
  const std::vector<double> x{1, 3};
  const auto [m, s] = mean_std(x);
  EXPECT_EQ(m, 2.0);
  EXPECT_EQ(s, 1.0);
}

TEST(SingleCriticReward, Examples) {
  const std::vector<double> r1{1, 2}, r2{3, 4}, r3{5, 6};
  const std::vector<double> first{1, 0, 0};
  EXPECT_EQ(single_critic_reward(r1, r2, r3, first), r1);
  const std::vector<double> w{0.7, 0.1, 0.2};
  const auto s = single_critic_reward(r1, r2, r3, w);
  EXPECT_NEAR(s[0], 0.7 + 0.3 + 1.0, 1e-15);
  EXPECT_NEAR(s[1], 1.4 + 0.4 + 1.2, 1e-15);
  const std::vector<double> w2{1.4, 0.2, 0.4};
  const auto s2 = single_critic_reward(r1, r2, r3, w2);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s2[i], 2.0 * s[i], 1e-14);
}

TEST(CriticLoss, Examples) {
  const auto v = nn::Tensor::from({3}, {1, 2, 3});
  EXPECT_EQ(critic_loss(v, v).item(), 0.0);
  const auto shifted = nn::Tensor::from({3}, {1.5, 2.5, 3.5});
  EXPECT_DOUBLE_EQ(critic_loss(v, shifted).item(), 0.25);
  EXPECT_THROW(critic_loss(v, nn::Tensor::from({2}, {1, 2})), DimensionError);
}

TEST(SurrogateLoss, ClipsLargeRatio) {
  const auto logp = nn::Tensor::from({1}, {std::log(1.5)});
  const auto old = nn::Tensor::from({1}, {0.0});
  EXPECT_NEAR(surrogate_loss(logp, old, nn::Tensor::from({1}, {2.0}), 0.2).item(), -2.4, 1e-12);
  EXPECT_NEAR(surrogate_loss(logp, old, nn::Tensor::from({1}, {-1.0}), 0.2).item(), 1.5, 1e-12);
  const auto small = nn::Tensor::from({1}, {std::log(1.1)});
  EXPECT_NEAR(surrogate_loss(small, old, nn::Tensor::from({1}, {2.0}), 0.2).item(), -2.2, 1e-12);
}

TEST(SurrogateLoss, ClippedBranchHasNoGradient) {
  nn::Tape tape;
  nn::Tape::Scope scope(tape);
  const auto logp = nn::Tensor::from({1}, {std::log(1.5)}, true);
  tape.backward(surrogate_loss(logp, nn::Tensor::from({1}, {0.0}), nn::Tensor::from({1}, {2.0}), 0.2));
  EXPECT_EQ(logp.grad()[0], 0.0);
}

TEST(GaussianKl, ZeroForIdenticalAndClosedForm) {
  const std::vector<double> m{0.1, 0.2}, s{0.5, 1.0};
  EXPECT_EQ(gaussian_kl(m, s, m, s, 1, 2), 0.0);
  const std::vector<double> m2{1.1, 0.2}, s2{0.5, 2.0};
  const double want = (0.25 + 1.0) / (2 * 0.25) - 0.5 + std::log(2.0) + 1.0 / 8.0 - 0.5;
  EXPECT_NEAR(gaussian_kl(m, s, m2, s2, 1, 2), want, 1e-14);
}

TEST(AdaptLr, Schedule) {
  PPOConfig c;
  EXPECT_NEAR(adapt_lr(1e-3, 0.05, c), 1e-3 / 1.5, 1e-18);
  EXPECT_NEAR(adapt_lr(1e-3, 0.001, c), 1.5e-3, 1e-18);
  EXPECT_EQ(adapt_lr(1e-3, 0.01, c), 1e-3);
  EXPECT_EQ(adapt_lr(1e-2, 0.0, c), 1e-2);
  EXPECT_EQ(adapt_lr(1e-6, 1.0, c), 1e-6);
}

TEST(PPOConfig, Validation) {
  PPOConfig c;
  EXPECT_NO_THROW(c.validate());
  c.weights = {0, 0, 0};
  EXPECT_THROW(c.validate(), SchemaError);
  c = PPOConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), SchemaError);
  c = PPOConfig{};
  c.num_envs = 3;
  c.rollout_length = 5;
  EXPECT_THROW(c.validate(), SchemaError);
}

TEST(Modes, ParseNames) {
  EXPECT_EQ(parse_critic_mode("multi"), CriticMode::Multi);
  EXPECT_EQ(parse_critic_mode("single_critic"), CriticMode::Single);
  EXPECT_THROW(parse_critic_mode("dual"), SchemaError);
  EXPECT_EQ(parse_value_target_mode("td_one_step"), ValueTargetMode::TdOneStep);
  EXPECT_THROW(parse_value_target_mode("mc"), SchemaError);
}
