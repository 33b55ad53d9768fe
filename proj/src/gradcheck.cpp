#include "shadow/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "shadow/nn.hpp"

namespace shadow::nn {

bool GradCheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const GradCheckResult& r) { return r.pass; });
}

double gradient_error(const std::vector<Tensor>& inputs, const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                      std::mt19937_64& rng, double step, std::size_t max_coords) {
  std::vector<Tensor> xs = inputs;
  for (Tensor& x : xs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  // Project the output onto a fixed random direction so every output
  // coordinate contributes to the scalar being differentiated.
  std::normal_distribution<double> n01;
  Tensor probe;
  {
    const Tensor out = fn(xs);
    std::vector<double> r(out.numel());
    for (double& v : r) v = n01(rng);
    probe = Tensor::from(out.shape(), std::move(r));
  }
  auto loss_of = [&]() { return sum(mul(fn(xs), probe)).item(); };

  Tape tape;
  {
    Tape::Scope scope(tape);
    tape.backward(sum(mul(fn(xs), probe)));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs[i].numel(); ++j) coords.emplace_back(i, j);
  }
  if (max_coords > 0 && coords.size() > max_coords) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  double max_diff = 0.0;
  double scale = 1e-8;
  for (const auto& [i, j] : coords) {
    double& v = xs[i].data()[j];
    const double saved = v;
    v = saved + step;
    const double up = loss_of();
    v = saved - step;
    const double down = loss_of();
    v = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = xs[i].has_grad() ? xs[i].grad()[j] : 0.0;
    max_diff = std::max(max_diff, std::abs(analytic - numeric));
    scale = std::max({scale, std::abs(analytic), std::abs(numeric)});
  }
  return max_diff / scale;
}

GradCheckResult run_case(const GradCase& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradCheckResult r{c.name, 0.0, c.tolerance, c.trials, true};
  for (int t = 0; t < c.trials; ++t) {
    const auto inputs = c.make_inputs(rng, t);
    const double e = gradient_error(inputs, c.fn, rng, 1e-5, c.max_coords);
    if (!std::isfinite(e)) {
      r.max_rel_error = e;
      break;
    }
    r.max_rel_error = std::max(r.max_rel_error, e);
  }
  r.pass = std::isfinite(r.max_rel_error) && r.max_rel_error < c.tolerance;
  return r;
}

GradCheckReport run_gradcheck(const std::vector<GradCase>& cases, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport rep;
  for (std::size_t i = 0; i < cases.size(); ++i) rep.results.push_back(run_case(cases[i], seed + i));
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---- cases ----------------------------------------------------------------

namespace {

std::size_t rand_dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 5) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Shape rand_shape(std::mt19937_64& rng) {
  Shape s(rand_dim(rng, 1, 3));
  for (auto& d : s) d = rand_dim(rng);
  return s;
}

/// Normal values nudged at least `margin` away from each kink.
Tensor randn(const Shape& s, std::mt19937_64& rng, std::vector<double> kinks = {}, double margin = 1e-2) {
  std::normal_distribution<double> n01;
  std::vector<double> v(numel(s));
  for (double& x : v) {
    x = n01(rng);
    for (double k : kinks) {
      if (std::abs(x - k) < margin) x = k + (x >= k ? margin : -margin);
    }
  }
  return Tensor::from(s, std::move(v));
}

Tensor rand_uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(s));
  for (double& x : v) x = u(rng);
  return Tensor::from(s, std::move(v));
}

Shape suffix_of(const Shape& s, std::mt19937_64& rng) {
  const std::size_t keep = std::uniform_int_distribution<std::size_t>(1, s.size())(rng);
  return Shape(s.end() - static_cast<std::ptrdiff_t>(keep), s.end());
}

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

GradCase unary_case(std::string name, std::function<Tensor(const Tensor&)> op, std::vector<double> kinks = {}) {
  return {name, [kinks](std::mt19937_64& rng, int) { return std::vector<Tensor>{randn(rand_shape(rng), rng, kinks)}; },
          [op](const std::vector<Tensor>& x) { return op(x[0]); }};
}

GradCase binary_case(std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, bool broadcast,
                     bool positive_b = false) {
  return {name,
          [broadcast, positive_b](std::mt19937_64& rng, int) {
            const Shape sa = rand_shape(rng);
            const Shape sb = broadcast ? suffix_of(sa, rng) : sa;
            Tensor b = positive_b ? rand_uniform(sb, rng, 0.5, 2.0) : randn(sb, rng);
            return std::vector<Tensor>{randn(sa, rng), b};
          },
          [op](const std::vector<Tensor>& x) { return op(x[0], x[1]); }};
}

/// Shared state between a composite's input generator and its function.
struct CompositeState {
  std::unique_ptr<PolicyNet> policy;
  std::unique_ptr<CriticNet> critic;
  std::unique_ptr<CommandEncoder> encoder;
  std::vector<std::size_t> select;
  Tensor action;
};

NetDims small_dims(std::mt19937_64& rng) {
  return {rand_dim(rng, 3, 7), rand_dim(rng, 4, 8), rand_dim(rng, 1, 4), rand_dim(rng, 1, 3)};
}

NetConfig small_net() {
  NetConfig cfg;
  cfg.encoder = {2, 2, 8, 12, 6};
  cfg.mlp = {10, 8};
  return cfg;
}

std::vector<std::size_t> rand_select(std::mt19937_64& rng, std::size_t batch, std::size_t tokens) {
  std::vector<std::size_t> s(batch);
  for (auto& i : s) i = rand_dim(rng, 0, tokens - 1);
  return s;
}

/// Inputs are the network parameters followed by the obs and token batches.
std::vector<Tensor> net_inputs(const ParamList& params, const Tensor& obs, const Tensor& tokens) {
  std::vector<Tensor> v;
  for (const auto& p : params) v.push_back(p.tensor);
  v.push_back(obs);
  v.push_back(tokens);
  return v;
}

NetInput unpack(const std::vector<Tensor>& x, const std::vector<std::size_t>& select) {
  return {x[x.size() - 2], x[x.size() - 1], select};
}

GradCase policy_case(std::string name, NetConfig cfg, bool full_size, std::size_t max_coords) {
  auto st = std::make_shared<CompositeState>();
  GradCase c;
  c.name = std::move(name);
  c.tolerance = 1e-3;
  c.trials = full_size ? 2 : 10;
  c.max_coords = max_coords;
  c.make_inputs = [st, cfg, full_size](std::mt19937_64& rng, int) {
    NetDims d = full_size ? NetDims{105, 39, 6, 5} : small_dims(rng);
    const std::size_t batch = rand_dim(rng, 1, 3);
    st->policy = std::make_unique<PolicyNet>(d, cfg, rng);
    st->select = rand_select(rng, batch, d.num_tokens);
    st->action = randn({batch, d.action_dim}, rng);
    return net_inputs(st->policy->parameters(), randn({batch, d.obs_width}, rng),
                      randn({batch, d.num_tokens, d.token_width}, rng));
  };
  c.fn = [st](const std::vector<Tensor>& x) {
    const PolicyOutput out = st->policy->forward(unpack(x, st->select));
    return concat_last({out.mean, reshape(gaussian_log_prob(out.mean, out.std, st->action), {out.mean.dim(0), 1})});
  };
  return c;
}

GradCase critic_case() {
  auto st = std::make_shared<CompositeState>();
  GradCase c;
  c.name = "composite/critic";
  c.tolerance = 1e-3;
  c.make_inputs = [st](std::mt19937_64& rng, int) {
    const NetDims d = small_dims(rng);
    const std::size_t batch = rand_dim(rng, 1, 3);
    st->critic = std::make_unique<CriticNet>(d, small_net(), rng);
    st->select = rand_select(rng, batch, d.num_tokens);
    return net_inputs(st->critic->parameters(), randn({batch, d.obs_width}, rng),
                      randn({batch, d.num_tokens, d.token_width}, rng));
  };
  c.fn = [st](const std::vector<Tensor>& x) { return st->critic->forward(unpack(x, st->select)); };
  return c;
}

GradCase encoder_case() {
  auto st = std::make_shared<CompositeState>();
  GradCase c;
  c.name = "composite/encoder";
  c.tolerance = 1e-3;
  c.make_inputs = [st](std::mt19937_64& rng, int) {
    const std::size_t width = rand_dim(rng, 3, 8);
    EncoderConfig cfg{rand_dim(rng, 1, 2), 2, 8, 12, 6};
    st->encoder = std::make_unique<CommandEncoder>(width, cfg, rng);
    ParamList params;
    st->encoder->collect("encoder", params);
    std::vector<Tensor> v;
    for (const auto& p : params) v.push_back(p.tensor);
    v.push_back(randn({rand_dim(rng, 1, 3), rand_dim(rng, 1, 5), width}, rng));
    return v;
  };
  c.fn = [st](const std::vector<Tensor>& x) { return st->encoder->forward(x.back()); };
  return c;
}

}  // namespace

std::vector<GradCase> default_grad_cases() {
  std::vector<GradCase> cases;

  cases.push_back({"matmul",
                   [](std::mt19937_64& rng, int) {
                     Shape sx = rand_shape(rng);
                     const std::size_t n = rand_dim(rng);
                     return std::vector<Tensor>{randn(sx, rng), randn({sx.back(), n}, rng)};
                   },
                   [](const std::vector<Tensor>& x) { return matmul(x[0], x[1]); }});
  cases.push_back({"linear",
                   [](std::mt19937_64& rng, int) {
                     Shape sx = rand_shape(rng);
                     const std::size_t n = rand_dim(rng);
                     return std::vector<Tensor>{randn(sx, rng), randn({sx.back(), n}, rng), randn({n}, rng)};
                   },
                   [](const std::vector<Tensor>& x) { return linear(x[0], x[1], x[2]); }});
  for (bool trans : {false, true}) {
    cases.push_back({trans ? "bmm_trans_b" : "bmm",
                     [trans](std::mt19937_64& rng, int) {
                       const std::size_t b = rand_dim(rng), m = rand_dim(rng), k = rand_dim(rng), n = rand_dim(rng);
                       const Shape sb = trans ? Shape{b, n, k} : Shape{b, k, n};
                       return std::vector<Tensor>{randn({b, m, k}, rng), randn(sb, rng)};
                     },
                     [trans](const std::vector<Tensor>& x) { return bmm(x[0], x[1], trans); }});
  }

  cases.push_back(binary_case("add", add, false));
  cases.push_back(binary_case("add_broadcast", add, true));
  cases.push_back(binary_case("sub", sub, false));
  cases.push_back(binary_case("sub_broadcast", sub, true));
  cases.push_back(binary_case("mul", mul, false));
  cases.push_back(binary_case("mul_broadcast", mul, true));
  cases.push_back(binary_case("div", div, false, true));
  cases.push_back(binary_case("div_broadcast", div, true, true));
  cases.push_back({"minimum",
                   [](std::mt19937_64& rng, int) {
                     const Shape s = rand_shape(rng);
                     Tensor a = randn(s, rng);
                     Tensor b = randn(s, rng);
                     // keep the two arguments apart so the branch is stable
                     auto av = a.data();
                     auto bv = b.data();
                     for (std::size_t i = 0; i < av.size(); ++i) {
                       if (std::abs(av[i] - bv[i]) < 1e-2) bv[i] = av[i] + 0.05;
                     }
                     return std::vector<Tensor>{a, b};
                   },
                   [](const std::vector<Tensor>& x) { return minimum(x[0], x[1]); }});

  cases.push_back(unary_case("scale", [](const Tensor& a) { return scale(a, -1.7); }));
  cases.push_back(unary_case("add_scalar", [](const Tensor& a) { return add_scalar(a, 0.3); }));
  cases.push_back(unary_case("clamp", [](const Tensor& a) { return clamp(a, -0.5, 0.8); }, {-0.5, 0.8}));
  cases.push_back(unary_case("clamp_min", [](const Tensor& a) { return clamp_min(a, 0.2); }, {0.2}));
  cases.push_back(unary_case("relu", relu, {0.0}));
  cases.push_back(unary_case("elu", elu, {0.0}));
  cases.push_back(unary_case("gelu", gelu));
  cases.push_back(unary_case("tanh", [](const Tensor& a) { return tanh(a); }));
  cases.push_back(unary_case("exp", [](const Tensor& a) { return exp(a); }));
  cases.push_back({"log", [](std::mt19937_64& rng, int) { return std::vector<Tensor>{rand_uniform(rand_shape(rng), rng, 0.2, 3.0)}; },
                   [](const std::vector<Tensor>& x) { return log(x[0]); }});
  cases.push_back(unary_case("square", square));

  cases.push_back(unary_case("sum", sum));
  cases.push_back(unary_case("mean", mean));
  cases.push_back(unary_case("sum_last", sum_last));
  cases.push_back(unary_case("softmax_last", softmax_last));
  cases.push_back({"layer_norm_last",
                   [](std::mt19937_64& rng, int) {
                     Shape s = rand_shape(rng);
                     s.back() = rand_dim(rng, 2, 6);
                     return std::vector<Tensor>{randn(s, rng)};
                   },
                   [](const std::vector<Tensor>& x) { return layer_norm_last(x[0]); }});

  cases.push_back({"concat_last",
                   [](std::mt19937_64& rng, int) {
                     Shape s = rand_shape(rng);
                     std::vector<Tensor> parts;
                     const std::size_t n = rand_dim(rng, 1, 3);
                     for (std::size_t i = 0; i < n; ++i) {
                       s.back() = rand_dim(rng);
                       parts.push_back(randn(s, rng));
                     }
                     return parts;
                   },
                   [](const std::vector<Tensor>& x) { return concat_last(x); }});
  auto slice_start = std::make_shared<std::pair<std::size_t, std::size_t>>();
  cases.push_back({"slice_last",
                   [slice_start](std::mt19937_64& rng, int) {
                     Shape s = rand_shape(rng);
                     s.back() = rand_dim(rng, 2, 6);
                     slice_start->first = rand_dim(rng, 0, s.back() - 1);
                     slice_start->second = rand_dim(rng, 1, s.back() - slice_start->first);
                     return std::vector<Tensor>{randn(s, rng)};
                   },
                   [slice_start](const std::vector<Tensor>& x) {
                     return slice_last(x[0], slice_start->first, slice_start->second);
                   }});
  cases.push_back(unary_case("reshape", [](const Tensor& a) { return reshape(a, {a.numel(), 1}); }));
  auto gather_idx = std::make_shared<std::vector<std::size_t>>();
  cases.push_back({"gather_rows",
                   [gather_idx](std::mt19937_64& rng, int) {
                     const std::size_t b = rand_dim(rng), t = rand_dim(rng), d = rand_dim(rng);
                     *gather_idx = rand_select(rng, b, t);
                     return std::vector<Tensor>{randn({b, t, d}, rng)};
                   },
                   [gather_idx](const std::vector<Tensor>& x) { return gather_rows(x[0], *gather_idx); }});

  cases.push_back({"gaussian_log_prob",
                   [](std::mt19937_64& rng, int) {
                     const std::size_t b = rand_dim(rng), n = rand_dim(rng);
                     return std::vector<Tensor>{randn({b, n}, rng), rand_uniform({n}, rng, 0.3, 2.0),
                                                randn({b, n}, rng)};
                   },
                   [](const std::vector<Tensor>& x) { return gaussian_log_prob(x[0], x[1], x[2]); }});
  cases.push_back({"layer_norm_affine",
                   [](std::mt19937_64& rng, int) {
                     Shape s = rand_shape(rng);
                     s.back() = rand_dim(rng, 2, 6);
                     return std::vector<Tensor>{randn(s, rng), randn({s.back()}, rng), randn({s.back()}, rng)};
                   },
                   [](const std::vector<Tensor>& x) {
                     LayerNorm ln;
                     ln.gain = x[1];
                     ln.bias = x[2];
                     return ln(x[0]);
                   }});

  cases.push_back(encoder_case());
  cases.push_back(policy_case("composite/policy", small_net(), false, 0));
  cases.push_back(critic_case());
  cases.push_back(policy_case("composite/policy_default_size", NetConfig{}, true, 48));
  return cases;
}

GradCase broken_grad_case() {
  // Forward is 2x, backward claims 3x.
  return {"broken_double",
          [](std::mt19937_64& rng, int) { return std::vector<Tensor>{randn(rand_shape(rng), rng)}; },
          [](const std::vector<Tensor>& x) {
            const Tensor& a = x[0];
            auto node = std::make_shared<Node>();
            node->shape = a.shape();
            node->value.resize(a.numel());
            for (std::size_t i = 0; i < a.numel(); ++i) node->value[i] = 2.0 * a.data()[i];
            if (Tape::active() && a.requires_grad()) {
              auto in = a.ptr();
              node->requires_grad = true;
              node->inputs = {in};
              node->op = "broken_double";
              node->backward = [in](Node& self) {
                auto& g = in->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * self.grad[i];
              };
              Tape::active()->record(node);
            }
            return Tensor(node);
          }};
}

}  // namespace shadow::nn
