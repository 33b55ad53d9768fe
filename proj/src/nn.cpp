#include "shadow/nn.hpp"

#include <cmath>
#include <numbers>

#include "shadow/error.hpp"

namespace shadow::nn {

std::size_t count_params(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void copy_params(const ParamList& src, ParamList& dst) {
  if (src.size() != dst.size()) throw DimensionError("copy_params: parameter count differs");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape()) {
      throw DimensionError("copy_params: mismatch at " + src[i].name + " " + shape_str(src[i].tensor.shape()) +
                           " vs " + dst[i].name + " " + shape_str(dst[i].tensor.shape()));
    }
    auto s = src[i].tensor.data();
    auto d = dst[i].tensor.data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

void zero_grads(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

// ---- layers ---------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> wv(in * out);
  for (double& v : wv) v = u(rng);
  std::vector<double> bv(out);
  for (double& v : bv) v = u(rng);
  w = Tensor::from({in, out}, std::move(wv), true);
  b = Tensor::from({out}, std::move(bv), true);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", w});
  out.push_back({prefix + ".bias", b});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain(Tensor::full({width}, 1.0, true)), bias(Tensor::zeros({width}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return add(mul(layer_norm_last(x), gain), bias); }

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::Relu:
      return relu(x);
    case Activation::Elu:
      return elu(x);
    case Activation::Gelu:
      return gelu(x);
    case Activation::Tanh:
      return tanh(x);
    case Activation::None:
      break;
  }
  return x;
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& hidden_sizes, std::size_t out, Activation act,
         std::mt19937_64& rng)
    : hidden(act) {
  std::size_t prev = in;
  for (std::size_t h : hidden_sizes) {
    layers.emplace_back(prev, h, rng);
    prev = h;
  }
  layers.emplace_back(prev, out, rng);
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = activate(h, hidden);
  }
  return h;
}

void Mlp::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

// ---- encoder --------------------------------------------------------------

void EncoderConfig::validate() const {
  if (num_heads == 0 || d_model == 0 || feedforward == 0 || output == 0) {
    throw SchemaError("network.encoder", "sizes must be positive");
  }
  if (d_model % num_heads != 0) {
    throw SchemaError("network.encoder.d_model", "d_model " + std::to_string(d_model) + " not divisible by " +
                                                     std::to_string(num_heads) + " heads");
  }
}

CommandEncoder::CommandEncoder(std::size_t token_width, const EncoderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg.d_model;
  input_ = Linear(token_width, d, rng);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    EncoderBlock blk;
    blk.norm_attn = LayerNorm(d);
    blk.query = Linear(d, d, rng);
    blk.key = Linear(d, d, rng);
    blk.value = Linear(d, d, rng);
    blk.proj = Linear(d, d, rng);
    blk.norm_ff = LayerNorm(d);
    blk.ff_in = Linear(d, cfg.feedforward, rng);
    blk.ff_out = Linear(cfg.feedforward, d, rng);
    blocks_.push_back(std::move(blk));
  }
  final_norm_ = LayerNorm(d);
  output_ = Linear(d, cfg.output, rng);
}

Tensor CommandEncoder::attention(const EncoderBlock& blk, const Tensor& x) const {
  const std::size_t heads = cfg_.num_heads;
  const std::size_t dh = cfg_.d_model / heads;
  const Tensor q = blk.query(x);
  const Tensor k = blk.key(x);
  const Tensor v = blk.value(x);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice_last(q, h * dh, dh);
    const Tensor kh = heads == 1 ? k : slice_last(k, h * dh, dh);
    const Tensor vh = heads == 1 ? v : slice_last(v, h * dh, dh);
    const Tensor weights = softmax_last(scale(bmm(qh, kh, true), inv));
    outs.push_back(bmm(weights, vh));
  }
  return blk.proj(heads == 1 ? outs.front() : concat_last(outs));
}

Tensor CommandEncoder::forward(const Tensor& tokens) const {
  if (tokens.rank() != 3 || tokens.dim(2) != token_width()) {
    throw DimensionError("encoder: expected tokens [B, T, " + std::to_string(token_width()) + "], got " +
                         shape_str(tokens.shape()));
  }
  Tensor x = relu(input_(tokens));
  for (const auto& blk : blocks_) {
    x = add(x, attention(blk, blk.norm_attn(x)));
    x = add(x, blk.ff_out(gelu(blk.ff_in(blk.norm_ff(x)))));
  }
  return output_(final_norm_(x));
}

void CommandEncoder::collect(const std::string& prefix, ParamList& out) const {
  input_.collect(prefix + ".input", out);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = prefix + ".block" + std::to_string(l);
    const auto& b = blocks_[l];
    b.norm_attn.collect(p + ".norm_attn", out);
    b.query.collect(p + ".query", out);
    b.key.collect(p + ".key", out);
    b.value.collect(p + ".value", out);
    b.proj.collect(p + ".proj", out);
    b.norm_ff.collect(p + ".norm_ff", out);
    b.ff_in.collect(p + ".ff_in", out);
    b.ff_out.collect(p + ".ff_out", out);
  }
  final_norm_.collect(prefix + ".final_norm", out);
  output_.collect(prefix + ".output", out);
}

std::size_t select_index(std::span<const double> t_lefts, std::size_t state_target_index) {
  std::size_t best = state_target_index;
  double best_t = 0.0;
  for (std::size_t i = 0; i < t_lefts.size(); ++i) {
    if (t_lefts[i] > 0.0 && (best == state_target_index || t_lefts[i] < best_t)) {
      best = i;
      best_t = t_lefts[i];
    }
  }
  return best;
}

Tensor select_embedding(const Tensor& embeddings, std::span<const std::size_t> index) {
  return gather_rows(embeddings, index);
}

// ---- policy and critic ----------------------------------------------------

void NetConfig::validate() const {
  encoder.validate();
  for (std::size_t h : mlp) {
    if (h == 0) throw SchemaError("network.mlp", "hidden sizes must be positive");
  }
  if (!(min_std > 0.0)) throw SchemaError("network.min_std", "must be positive");
}

namespace {

void check_input(const NetDims& dims, const NetInput& in) {
  if (in.obs.rank() != 2 || in.obs.dim(1) != dims.obs_width) {
    throw DimensionError("network: expected obs [B, " + std::to_string(dims.obs_width) + "], got " +
                         shape_str(in.obs.shape()));
  }
  if (in.tokens.rank() != 3 || in.tokens.dim(0) != in.obs.dim(0) || in.tokens.dim(2) != dims.token_width) {
    throw DimensionError("network: expected tokens [" + std::to_string(in.obs.dim(0)) + ", T, " +
                         std::to_string(dims.token_width) + "], got " + shape_str(in.tokens.shape()));
  }
  if (in.select.size() != in.obs.dim(0)) throw DimensionError("network: one selected token per row required");
}

Tensor trunk_input(const CommandEncoder& enc, const NetInput& in) {
  const Tensor emb = select_embedding(enc.forward(in.tokens), in.select);
  return concat_last({emb, in.obs});
}

}  // namespace

PolicyNet::PolicyNet(const NetDims& dims, const NetConfig& cfg, std::mt19937_64& rng) : dims_(dims), cfg_(cfg) {
  cfg.validate();
  encoder_ = CommandEncoder(dims.token_width, cfg.encoder, rng);
  mlp_ = Mlp(cfg.encoder.output + dims.obs_width, cfg.mlp, dims.action_dim, Activation::Elu, rng);
  log_std_ = Tensor::full({dims.action_dim}, cfg.init_log_std, true);
}

PolicyOutput PolicyNet::forward(const NetInput& in) const {
  check_input(dims_, in);
  Tensor mean = mlp_(trunk_input(encoder_, in));
  Tensor std = clamp_min(exp(log_std_), cfg_.min_std);
  return {mean, std};
}

ParamList PolicyNet::parameters() const {
  ParamList out;
  encoder_.collect("encoder", out);
  mlp_.collect("mlp", out);
  out.push_back({"log_std", log_std_});
  return out;
}

CriticNet::CriticNet(const NetDims& dims, const NetConfig& cfg, std::mt19937_64& rng) : dims_(dims) {
  cfg.validate();
  encoder_ = CommandEncoder(dims.token_width, cfg.encoder, rng);
  mlp_ = Mlp(cfg.encoder.output + dims.obs_width, cfg.mlp, 1, Activation::Elu, rng);
}

Tensor CriticNet::forward(const NetInput& in) const {
  check_input(dims_, in);
  const Tensor v = mlp_(trunk_input(encoder_, in));
  return reshape(v, {v.dim(0)});
}

ParamList CriticNet::parameters() const {
  ParamList out;
  encoder_.collect("encoder", out);
  mlp_.collect("mlp", out);
  return out;
}

NetInput make_input(const NetDims& dims, std::size_t batch, std::vector<double> obs, std::vector<double> tokens,
                    std::vector<std::size_t> select) {
  if (dims.num_tokens == 0 || tokens.size() != batch * dims.num_tokens * dims.token_width) {
    throw DimensionError("make_input: token batch holds " + std::to_string(tokens.size()) + " values, expected " +
                         std::to_string(batch * dims.num_tokens * dims.token_width));
  }
  NetInput in;
  in.obs = Tensor::from({batch, dims.obs_width}, std::move(obs));
  in.tokens = Tensor::from({batch, dims.num_tokens, dims.token_width}, std::move(tokens));
  in.select = std::move(select);
  return in;
}

Tensor gaussian_log_prob(const Tensor& mean, const Tensor& std, const Tensor& action) {
  if (mean.shape() != action.shape()) throw DimensionError("gaussian_log_prob: mean " + shape_str(mean.shape()) +
                                                           " vs action " + shape_str(action.shape()));
  const Tensor z = div(sub(action, mean), std);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  // log N = -z^2/2 - log(std) - log(2 pi)/2, summed over the last axis
  const Tensor per_dim = sub(scale(square(z), -0.5), log(std));
  return sum_last(add_scalar(per_dim, -half_log_2pi));
}

Tensor gaussian_entropy(const Tensor& std) {
  const double c = 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
  return add_scalar(sum(log(std)), c * static_cast<double>(std.numel()));
}

}  // namespace shadow::nn
