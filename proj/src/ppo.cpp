#include <algorithm>
#include <cmath>
#include <numeric>

#include "shadow/error.hpp"
#include "shadow/rl.hpp"

namespace shadow {

namespace {

struct Minibatch {
  nn::NetInput input;
  nn::Tensor actions;
  nn::Tensor old_log_prob;
  nn::Tensor advantages;
  std::vector<nn::Tensor> targets;
  std::vector<double> old_mean;
  std::vector<double> old_std;
};

template <class T>
void gather(const std::vector<T>& src, std::size_t width, std::span<const std::size_t> idx, std::vector<T>& dst) {
  dst.resize(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[r] * width), width,
                dst.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
}

Minibatch make_minibatch(const RolloutBuffer& buf, std::span<const std::size_t> idx, const std::vector<double>& adv,
                         const std::vector<std::vector<double>>& targets) {
  const nn::NetDims& d = buf.dims();
  const std::size_t b = idx.size();
  Minibatch mb;
  std::vector<double> obs, tokens, actions, logp, a;
  std::vector<std::size_t> select;
  gather(buf.obs, d.obs_width, idx, obs);
  gather(buf.tokens, d.num_tokens * d.token_width, idx, tokens);
  gather(buf.select, 1, idx, select);
  gather(buf.actions, d.action_dim, idx, actions);
  gather(buf.log_prob, 1, idx, logp);
  gather(buf.mean, d.action_dim, idx, mb.old_mean);
  gather(buf.std, d.action_dim, idx, mb.old_std);
  gather(adv, 1, idx, a);
  mb.input = nn::make_input(d, b, std::move(obs), std::move(tokens), std::move(select));
  mb.actions = nn::Tensor::from({b, d.action_dim}, std::move(actions));
  mb.old_log_prob = nn::Tensor::from({b}, std::move(logp));
  mb.advantages = nn::Tensor::from({b}, std::move(a));
  for (const auto& t : targets) {
    std::vector<double> v;
    gather(t, 1, idx, v);
    mb.targets.push_back(nn::Tensor::from({b}, std::move(v)));
  }
  return mb;
}

}  // namespace

PPO::PPO(nn::PolicyNet& policy, std::vector<nn::CriticNet>& critics, PPOConfig cfg, CriticMode mode)
    : policy_(policy), critics_(critics), cfg_(cfg), mode_(mode), lr_(cfg.lr) {
  cfg_.validate();
  const std::size_t want = mode == CriticMode::Multi ? kRewardGroups : 1;
  if (critics_.size() != want) {
    throw DimensionError(std::string("PPO: ") + critic_mode_name(mode) + " mode needs " + std::to_string(want) +
                         " critics, got " + std::to_string(critics_.size()));
  }
  const nn::AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  actor_params_ = policy_.parameters();
  actor_opt_ = nn::AdamW(actor_params_, opt);
  for (const auto& c : critics_) {
    critic_params_.push_back(c.parameters());
    critic_opts_.emplace_back(critic_params_.back(), opt);
  }
}

void PPO::set_lr(double lr) {
  lr_ = lr;
  actor_opt_.set_lr(lr);
  for (auto& o : critic_opts_) o.set_lr(lr);
}

std::vector<double> PPO::advantages(const RolloutBuffer& buf, std::vector<std::vector<double>>& targets) const {
  if (buf.streams() != streams()) {
    throw DimensionError("PPO: buffer carries " + std::to_string(buf.streams()) + " reward streams, expected " +
                         std::to_string(streams()));
  }
  const auto done = buf.done();
  const std::size_t T = buf.steps();
  const std::size_t N = buf.envs();
  std::vector<std::vector<double>> adv;
  targets.clear();
  for (std::size_t s = 0; s < streams(); ++s) {
    adv.push_back(compute_gae(buf.rewards[s], buf.values[s], buf.last_values[s], done, buf.bootstrap[s], T, N,
                              cfg_.gamma, cfg_.lambda));
    if (cfg_.value_target == ValueTargetMode::GaeReturn) {
      std::vector<double> ret(adv.back().size());
      for (std::size_t i = 0; i < ret.size(); ++i) ret[i] = adv.back()[i] + buf.values[s][i];
      targets.push_back(std::move(ret));
    } else {
      targets.push_back(td_targets(buf.rewards[s], buf.values[s], buf.last_values[s], done, buf.bootstrap[s], T, N,
                                   cfg_.gamma));
    }
  }
  if (mode_ == CriticMode::Multi) return mix_advantages(adv, cfg_.weights, cfg_.norm_eps);
  const double one[] = {1.0};
  return mix_advantages(adv, one, cfg_.norm_eps);
}

PPOStats PPO::update(const RolloutBuffer& buf, std::mt19937_64& rng) {
  std::vector<std::vector<double>> targets;
  const std::vector<double> adv = advantages(buf, targets);

  const std::size_t batch = buf.size();
  if (batch % cfg_.num_minibatches != 0) {
    throw DimensionError("PPO: " + std::to_string(cfg_.num_minibatches) + " minibatches do not divide " +
                         std::to_string(batch) + " samples");
  }
  const std::size_t mb_size = batch / cfg_.num_minibatches;
  const std::size_t nj = buf.dims().action_dim;

  PPOStats stats;
  std::size_t updates = 0;
  std::vector<std::size_t> order(batch);
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t m = 0; m < cfg_.num_minibatches; ++m) {
      const std::span<const std::size_t> idx(order.data() + m * mb_size, mb_size);
      const Minibatch mb = make_minibatch(buf, idx, adv, targets);

      nn::Tape tape;
      nn::Tape::Scope scope(tape);
      const nn::PolicyOutput out = policy_.forward(mb.input);
      const nn::Tensor logp = nn::gaussian_log_prob(out.mean, out.std, mb.actions);
      const nn::Tensor surr = surrogate_loss(logp, mb.old_log_prob, mb.advantages, cfg_.clip);
      const nn::Tensor entropy = nn::gaussian_entropy(out.std);
      nn::Tensor total = nn::add(surr, nn::scale(entropy, -cfg_.entropy_coef));
      std::array<double, kRewardGroups> vloss{};
      for (std::size_t s = 0; s < critics_.size(); ++s) {
        const nn::Tensor l = critic_loss(critics_[s].forward(mb.input), mb.targets[s]);
        vloss[s] = l.item();
        total = nn::add(total, l);
      }
      if (!std::isfinite(total.item())) {
        throw DivergenceError("PPO: non-finite loss (surrogate " + std::to_string(surr.item()) + ", epoch " +
                              std::to_string(epoch) + ", minibatch " + std::to_string(m) + ")");
      }

      std::vector<double> new_std(mb_size * nj);
      for (std::size_t r = 0; r < mb_size; ++r) {
        std::copy_n(out.std.data().begin(), nj, new_std.begin() + static_cast<std::ptrdiff_t>(r * nj));
      }
      const double kl = gaussian_kl(mb.old_mean, mb.old_std, out.mean.data(), new_std, mb_size, nj);

      nn::zero_grads(actor_params_);
      for (auto& p : critic_params_) nn::zero_grads(p);
      tape.backward(total);
      nn::clip_grad_norm(actor_params_, cfg_.max_grad_norm);
      for (auto& p : critic_params_) nn::clip_grad_norm(p, cfg_.max_grad_norm);

      if (std::isfinite(kl)) set_lr(adapt_lr(lr_, kl, cfg_));
      actor_opt_.step();
      for (auto& o : critic_opts_) o.step();

      stats.surrogate += surr.item();
      for (std::size_t s = 0; s < critics_.size(); ++s) stats.value_loss[s] += vloss[s];
      stats.entropy += entropy.item();
      stats.approx_kl += kl;
      ++updates;
    }
  }
  const double n = static_cast<double>(updates);
  stats.surrogate /= n;
  for (double& v : stats.value_loss) v /= n;
  stats.entropy /= n;
  stats.approx_kl /= n;
  stats.lr = lr_;
  return stats;
}

}  // namespace shadow
