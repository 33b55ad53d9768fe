#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shadow/tensor.hpp"

namespace shadow::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::size_t count_params(const ParamList& params);
/// Deep copy of every value into `dst`; names and shapes must match.
void copy_params(const ParamList& src, ParamList& dst);
void zero_grads(ParamList& params);

/// y = x W + b with W stored [in, out], PyTorch-style uniform(+-1/sqrt(in)) init.
struct Linear {
  Tensor w;
  Tensor b;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
  std::size_t in() const { return w.dim(0); }
  std::size_t out() const { return w.dim(1); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Layer norm over the last axis with learnable gain and bias.
struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

enum class Activation { Relu, Elu, Gelu, Tanh, None };
Tensor activate(const Tensor& x, Activation a);

struct Mlp {
  std::vector<Linear> layers;
  Activation hidden = Activation::Elu;

  Mlp() = default;
  Mlp(std::size_t in, const std::vector<std::size_t>& hidden_sizes, std::size_t out, Activation act,
      std::mt19937_64& rng);
  /// Hidden layers are activated; the last layer is linear.
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct EncoderConfig {
  std::size_t num_heads = 1;
  std::size_t num_layers = 2;
  std::size_t d_model = 128;
  std::size_t feedforward = 128;
  std::size_t output = 128;

  void validate() const;
};

struct EncoderBlock {
  LayerNorm norm_attn;
  Linear query, key, value, proj;
  LayerNorm norm_ff;
  Linear ff_in, ff_out;
};

/// Transformer over command tokens: ReLU input projection, pre-norm blocks of
/// self-attention and a GELU feed-forward, a final layer norm, then a linear
/// map to the output width. No positional encoding.
class CommandEncoder {
 public:
  CommandEncoder() = default;
  CommandEncoder(std::size_t token_width, const EncoderConfig& cfg, std::mt19937_64& rng);

  /// tokens [B, T, token_width] -> [B, T, output]
  Tensor forward(const Tensor& tokens) const;
  std::size_t token_width() const { return input_.in(); }
  const EncoderConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor attention(const EncoderBlock& blk, const Tensor& x) const;

  EncoderConfig cfg_;
  Linear input_;
  std::vector<EncoderBlock> blocks_;
  LayerNorm final_norm_;
  Linear output_;
};

/// Index of the keyframe token with the smallest strictly positive t_left, or
/// `state_target_index` when none is positive.
std::size_t select_index(std::span<const double> t_lefts, std::size_t state_target_index);

/// embeddings [B, T, D] -> [B, D], one selected token per row. Gradient flows
/// only into the selected tokens.
Tensor select_embedding(const Tensor& embeddings, std::span<const std::size_t> index);

struct NetConfig {
  EncoderConfig encoder;
  std::vector<std::size_t> mlp{512, 256, 256};
  double min_std = 0.2;
  double init_log_std = 0.0;

  void validate() const;
};

/// Problem dimensions a network is built for.
struct NetDims {
  std::size_t obs_width = 0;
  std::size_t token_width = 0;
  std::size_t num_tokens = 0;
  std::size_t action_dim = 0;
};

struct PolicyOutput {
  Tensor mean;  ///< [B, n_j]
  Tensor std;   ///< [n_j]
};

/// Batched network input. obs [B, obs_width], tokens [B, T, token_width] and
/// the selected token per row.
struct NetInput {
  Tensor obs;
  Tensor tokens;
  std::vector<std::size_t> select;
};

class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const NetDims& dims, const NetConfig& cfg, std::mt19937_64& rng);

  PolicyOutput forward(const NetInput& in) const;
  ParamList parameters() const;
  const NetDims& dims() const { return dims_; }
  const NetConfig& config() const { return cfg_; }
  Tensor log_std() const { return log_std_; }

 private:
  NetDims dims_;
  NetConfig cfg_;
  CommandEncoder encoder_;
  Mlp mlp_;
  Tensor log_std_;
};

class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(const NetDims& dims, const NetConfig& cfg, std::mt19937_64& rng);

  /// -> values [B]
  Tensor forward(const NetInput& in) const;
  ParamList parameters() const;

 private:
  NetDims dims_;
  CommandEncoder encoder_;
  Mlp mlp_;
};

/// Checks widths and builds a NetInput from flat row-major batches.
NetInput make_input(const NetDims& dims, std::size_t batch, std::vector<double> obs, std::vector<double> tokens,
                    std::vector<std::size_t> select);

/// Diagonal Gaussian log density summed over the last axis: mean/action [B, n],
/// std [n] or [B, n] -> [B].
Tensor gaussian_log_prob(const Tensor& mean, const Tensor& std, const Tensor& action);
/// Entropy of the diagonal Gaussian with the given std [n] -> [1].
Tensor gaussian_entropy(const Tensor& std);

}  // namespace shadow::nn
