#include "shadow/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shadow/error.hpp"

namespace shadow {

ValueTargetMode parse_value_target_mode(const std::string& s) {
  if (s == "gae_return") return ValueTargetMode::GaeReturn;
  if (s == "td_one_step") return ValueTargetMode::TdOneStep;
  throw SchemaError("ppo.value_target", "unknown mode '" + s + "' (expected gae_return or td_one_step)");
}

const char* value_target_mode_name(ValueTargetMode m) {
  return m == ValueTargetMode::GaeReturn ? "gae_return" : "td_one_step";
}

CriticMode parse_critic_mode(const std::string& s) {
  if (s == "multi" || s == "multi_critic") return CriticMode::Multi;
  if (s == "single" || s == "single_critic") return CriticMode::Single;
  throw SchemaError("mode", "unknown critic mode '" + s + "' (expected multi or single)");
}

const char* critic_mode_name(CriticMode m) { return m == CriticMode::Multi ? "multi" : "single"; }

void PPOConfig::validate() const {
  auto positive = [](double v, const char* path) {
    if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError(path, "must be positive");
  };
  positive(lr, "ppo.lr");
  positive(clip, "ppo.clip");
  positive(desired_kl, "ppo.desired_kl");
  positive(max_grad_norm, "ppo.max_grad_norm");
  positive(lr_min, "ppo.lr_min");
  if (lr_max < lr_min) throw SchemaError("ppo.lr_max", "must not be below lr_min");
  if (entropy_coef < 0.0) throw SchemaError("ppo.entropy_coef", "must be non-negative");
  if (weight_decay < 0.0) throw SchemaError("ppo.weight_decay", "must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw SchemaError("ppo.gamma", "must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw SchemaError("ppo.lambda", "must lie in (0, 1]");
  double wsum = 0.0;
  for (double w : weights) wsum += std::abs(w);
  if (!(wsum > 0.0)) throw SchemaError("ppo.weights", "at least one weight must be nonzero");
  if (epochs == 0 || rollout_length == 0 || num_envs == 0 || num_minibatches == 0) {
    throw SchemaError("ppo", "epochs, rollout_length, num_envs and num_minibatches must be positive");
  }
  if ((rollout_length * num_envs) % num_minibatches != 0) {
    throw SchemaError("ppo.num_minibatches", std::to_string(num_minibatches) + " does not divide the batch of " +
                                                 std::to_string(rollout_length * num_envs));
  }
  positive(norm_eps, "ppo.norm_eps");
}

namespace {

void check_rollout(std::size_t T, std::size_t N, std::span<const double> rewards, std::span<const double> values,
                   std::span<const double> last_values, std::span<const std::uint8_t> done,
                   std::span<const double> bootstrap) {
  const std::size_t n = T * N;
  if (rewards.size() != n || values.size() != n || done.size() != n || bootstrap.size() != n ||
      last_values.size() != N) {
    throw DimensionError("rollout arrays must be [" + std::to_string(T) + ", " + std::to_string(N) +
                         "] with N last values");
  }
}

}  // namespace

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const double> last_values, std::span<const std::uint8_t> done,
                                std::span<const double> bootstrap, std::size_t T, std::size_t N, double gamma,
                                double lambda) {
  check_rollout(T, N, rewards, values, last_values, done, bootstrap);
  std::vector<double> adv(T * N, 0.0);
  std::vector<double> next_adv(N, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = t * N + n;
      const double next_value = t + 1 < T ? values[i + N] : last_values[n];
      const double live = done[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * (next_value * live + bootstrap[i]) - values[i];
      adv[i] = delta + gamma * lambda * live * next_adv[n];
      next_adv[n] = adv[i];
    }
  }
  return adv;
}

std::vector<double> td_targets(std::span<const double> rewards, std::span<const double> values,
                               std::span<const double> last_values, std::span<const std::uint8_t> done,
                               std::span<const double> bootstrap, std::size_t T, std::size_t N, double gamma) {
  check_rollout(T, N, rewards, values, last_values, done, bootstrap);
  std::vector<double> out(T * N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = t * N + n;
      const double next_value = t + 1 < T ? values[i + N] : last_values[n];
      out[i] = rewards[i] + gamma * ((done[i] ? 0.0 : next_value) + bootstrap[i]);
    }
  }
  return out;
}

std::pair<double, double> mean_std(std::span<const double> x) {
  if (x.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  return {mu, std::sqrt(var / n)};
}

std::vector<double> mix_advantages(const std::vector<std::vector<double>>& streams, std::span<const double> weights,
                                   double eps) {
  if (streams.empty() || streams.size() != weights.size()) {
    throw DimensionError("mix_advantages: " + std::to_string(streams.size()) + " streams but " +
                         std::to_string(weights.size()) + " weights");
  }
  const std::size_t n = streams.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    if (streams[s].size() != n) throw DimensionError("mix_advantages: streams differ in length");
    const auto [mu, sd] = mean_std(streams[s]);
    const double denom = sd + eps;
    for (std::size_t i = 0; i < n; ++i) out[i] += weights[s] * ((streams[s][i] - mu) / denom);
  }
  return out;
}

std::vector<double> single_critic_reward(std::span<const double> r1, std::span<const double> r2,
                                         std::span<const double> r3, std::span<const double> weights) {
  if (r1.size() != r2.size() || r1.size() != r3.size() || weights.size() != kRewardGroups) {
    throw DimensionError("single_critic_reward: misaligned inputs");
  }
  std::vector<double> out(r1.size());
  for (std::size_t i = 0; i < r1.size(); ++i) out[i] = weights[0] * r1[i] + weights[1] * r2[i] + weights[2] * r3[i];
  return out;
}

nn::Tensor critic_loss(const nn::Tensor& values, const nn::Tensor& targets) {
  if (values.shape() != targets.shape()) {
    throw DimensionError("critic_loss: values " + nn::shape_str(values.shape()) + " vs targets " +
                         nn::shape_str(targets.shape()));
  }
  return nn::mean(nn::square(nn::sub(values, targets)));
}

nn::Tensor surrogate_loss(const nn::Tensor& log_prob, const nn::Tensor& old_log_prob, const nn::Tensor& advantages,
                          double clip) {
  const nn::Tensor ratio = nn::exp(nn::sub(log_prob, old_log_prob));
  const nn::Tensor unclipped = nn::mul(ratio, advantages);
  const nn::Tensor clipped = nn::mul(nn::clamp(ratio, 1.0 - clip, 1.0 + clip), advantages);
  return nn::scale(nn::mean(nn::minimum(unclipped, clipped)), -1.0);
}

double gaussian_kl(std::span<const double> old_mean, std::span<const double> old_std,
                   std::span<const double> new_mean, std::span<const double> new_std, std::size_t batch,
                   std::size_t dim) {
  if (old_mean.size() != batch * dim || new_mean.size() != batch * dim || old_std.size() != batch * dim ||
      new_std.size() != batch * dim) {
    throw DimensionError("gaussian_kl: expected [" + std::to_string(batch) + ", " + std::to_string(dim) + "] inputs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch * dim; ++i) {
    const double so = old_std[i];
    const double sn = new_std[i];
    const double dm = old_mean[i] - new_mean[i];
    total += std::log(sn / so) + (so * so + dm * dm) / (2.0 * sn * sn) - 0.5;
  }
  return batch == 0 ? 0.0 : total / static_cast<double>(batch);
}

double adapt_lr(double lr, double kl, const PPOConfig& cfg) {
  if (kl > 2.0 * cfg.desired_kl) {
    lr /= 1.5;
  } else if (kl < 0.5 * cfg.desired_kl) {
    lr *= 1.5;
  }
  return std::clamp(lr, cfg.lr_min, cfg.lr_max);
}

// ---- rollout buffer -------------------------------------------------------

RolloutBuffer::RolloutBuffer(std::size_t T, std::size_t N, const nn::NetDims& dims, std::size_t streams)
    : T_(T), N_(N), streams_(streams), dims_(dims) {
  clear();
}

void RolloutBuffer::clear() {
  const std::size_t n = T_ * N_;
  obs.assign(n * dims_.obs_width, 0.0);
  tokens.assign(n * dims_.num_tokens * dims_.token_width, 0.0);
  select.assign(n, 0);
  actions.assign(n * dims_.action_dim, 0.0);
  log_prob.assign(n, 0.0);
  mean.assign(n * dims_.action_dim, 0.0);
  std.assign(n * dims_.action_dim, 0.0);
  terminated.assign(n, 0);
  truncated.assign(n, 0);
  rewards.assign(streams_, std::vector<double>(n, 0.0));
  values.assign(streams_, std::vector<double>(n, 0.0));
  bootstrap.assign(streams_, std::vector<double>(n, 0.0));
  last_values.assign(streams_, std::vector<double>(N_, 0.0));
}

std::vector<std::uint8_t> RolloutBuffer::done() const {
  std::vector<std::uint8_t> d(terminated.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = terminated[i] || truncated[i];
  return d;
}

}  // namespace shadow
