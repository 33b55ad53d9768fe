#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shadow/nn.hpp"
#include "shadow/optim.hpp"

namespace shadow {

inline constexpr std::size_t kRewardGroups = 3;  ///< task, regularization, safety

enum class ValueTargetMode { GaeReturn, TdOneStep };
ValueTargetMode parse_value_target_mode(const std::string& s);
const char* value_target_mode_name(ValueTargetMode m);

enum class CriticMode { Multi, Single };
CriticMode parse_critic_mode(const std::string& s);
const char* critic_mode_name(CriticMode m);

struct PPOConfig {
  double lr = 1e-4;
  double clip = 0.2;
  double entropy_coef = 0.0;
  double desired_kl = 0.01;
  double max_grad_norm = 1.0;
  std::size_t num_minibatches = 4;
  double gamma = 0.99;
  double lambda = 0.95;
  std::array<double, kRewardGroups> weights{0.7, 0.1, 0.2};
  std::size_t epochs = 5;
  std::size_t rollout_length = 24;
  std::size_t num_envs = 256;
  double norm_eps = 1e-8;
  ValueTargetMode value_target = ValueTargetMode::GaeReturn;
  double weight_decay = 0.01;
  double lr_min = 1e-6;
  double lr_max = 1e-2;

  void validate() const;
};

/// Advantages by the backward GAE recursion over a [T, N] rollout (row t holds
/// the N environments at step t).
///
/// done[t, n] ends the episode after step t. bootstrap[t, n] is added as
/// gamma * bootstrap to the step's TD target; it carries V(s_final) on
/// truncated steps and is zero otherwise. last_values[n] is V(s_T) for
/// environments still running at the end of the rollout.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                std::span<const double> last_values, std::span<const std::uint8_t> done,
                                std::span<const double> bootstrap, std::size_t T, std::size_t N, double gamma,
                                double lambda);

/// r + gamma V(s') with the same done / bootstrap conventions as compute_gae.
std::vector<double> td_targets(std::span<const double> rewards, std::span<const double> values,
                               std::span<const double> last_values, std::span<const std::uint8_t> done,
                               std::span<const double> bootstrap, std::size_t T, std::size_t N, double gamma);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> x);

/// sum_i w_i (A_i - mean_i) / (std_i + eps), batch statistics per stream.
std::vector<double> mix_advantages(const std::vector<std::vector<double>>& streams, std::span<const double> weights,
                                   double eps = 1e-8);

/// w1 r1 + w2 r2 + w3 r3 per step.
std::vector<double> single_critic_reward(std::span<const double> r1, std::span<const double> r2,
                                         std::span<const double> r3, std::span<const double> weights);

/// Mean squared error between predicted values and targets.
nn::Tensor critic_loss(const nn::Tensor& values, const nn::Tensor& targets);

/// Clipped PPO surrogate loss (to be minimized) for one batch.
nn::Tensor surrogate_loss(const nn::Tensor& log_prob, const nn::Tensor& old_log_prob, const nn::Tensor& advantages,
                          double clip);

/// KL(old || new) between diagonal Gaussians, averaged over the batch.
double gaussian_kl(std::span<const double> old_mean, std::span<const double> old_std,
                   std::span<const double> new_mean, std::span<const double> new_std, std::size_t batch,
                   std::size_t dim);

/// The adaptive schedule: lr / 1.5 above 2 desired_kl, lr * 1.5 below half of
/// it, clamped to [lr_min, lr_max].
double adapt_lr(double lr, double kl, const PPOConfig& cfg);

/// One rollout, stored as [T, N] rows.
class RolloutBuffer {
 public:
  RolloutBuffer() = default;
  RolloutBuffer(std::size_t T, std::size_t N, const nn::NetDims& dims, std::size_t streams);

  std::size_t steps() const { return T_; }
  std::size_t envs() const { return N_; }
  std::size_t size() const { return T_ * N_; }
  std::size_t streams() const { return streams_; }
  const nn::NetDims& dims() const { return dims_; }

  /// Per-sample storage, index t * N + n.
  std::vector<double> obs;      ///< [T N, obs_width]
  std::vector<double> tokens;   ///< [T N, num_tokens, token_width]
  std::vector<std::size_t> select;
  std::vector<double> actions;  ///< [T N, action_dim]
  std::vector<double> log_prob;
  std::vector<double> mean;     ///< policy mean at collection
  std::vector<double> std;      ///< [T N, action_dim] policy std at collection
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  std::vector<std::vector<double>> rewards;    ///< [stream][T N]
  std::vector<std::vector<double>> values;     ///< [stream][T N]
  std::vector<std::vector<double>> bootstrap;  ///< [stream][T N]
  std::vector<std::vector<double>> last_values;  ///< [stream][N]

  std::vector<std::uint8_t> done() const;
  void clear();

 private:
  std::size_t T_ = 0;
  std::size_t N_ = 0;
  std::size_t streams_ = 0;
  nn::NetDims dims_;
};

struct PPOStats {
  double surrogate = 0.0;
  std::array<double, kRewardGroups> value_loss{};
  double entropy = 0.0;
  double approx_kl = 0.0;
  double lr = 0.0;
};

/// PPO over one actor and either three critics (one per reward group, mixed
/// advantages) or a single critic on the weighted reward sum. Gradient norms
/// are clipped per network.
class PPO {
 public:
  PPO(nn::PolicyNet& policy, std::vector<nn::CriticNet>& critics, PPOConfig cfg, CriticMode mode);

  /// Reward streams the buffer must carry: 3 (multi) or 1 (single).
  std::size_t streams() const { return critics_.size(); }
  CriticMode mode() const { return mode_; }
  const PPOConfig& config() const { return cfg_; }
  double lr() const { return lr_; }
  void set_lr(double lr);

  /// Advantages used for the policy loss, and the value targets per stream.
  std::vector<double> advantages(const RolloutBuffer& buf, std::vector<std::vector<double>>& targets) const;

  PPOStats update(const RolloutBuffer& buf, std::mt19937_64& rng);

  nn::AdamW& actor_optimizer() { return actor_opt_; }
  std::vector<nn::AdamW>& critic_optimizers() { return critic_opts_; }

 private:
  nn::PolicyNet& policy_;
  std::vector<nn::CriticNet>& critics_;
  PPOConfig cfg_;
  CriticMode mode_;
  double lr_;
  nn::ParamList actor_params_;
  std::vector<nn::ParamList> critic_params_;
  nn::AdamW actor_opt_;
  std::vector<nn::AdamW> critic_opts_;
};

}  // namespace shadow
