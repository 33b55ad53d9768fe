#include "shadow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "shadow/error.hpp"
#include "shadow/kernels.hpp"

namespace shadow::nn {

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << "]";
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor() : node_(std::make_shared<Node>()) { node_->shape = {0}; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(nn::numel(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (nn::numel(shape) != data.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " + std::to_string(nn::numel(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::dim(int i) const {
  const auto r = static_cast<int>(rank());
  return node_->shape.at(static_cast<std::size_t>(i < 0 ? r + i : i));
}
std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::grad() { return node_->grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
void Tensor::zero_grad() { node_->grad.clear(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }
double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on a tensor of shape " + shape_str(shape()));
  return node_->value[0];
}
Tensor Tensor::detach() const { return from(shape(), node_->value, false); }
Tensor Tensor::clone() const { return from(shape(), node_->value, requires_grad()); }

// ---- Tape -----------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }
Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw DimensionError("backward: loss must hold one element, shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
}

// ---- helpers --------------------------------------------------------------

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

bool any_grad(std::initializer_list<const Tensor*> ts) {
  if (!Tape::active()) return false;
  return std::any_of(ts.begin(), ts.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make(Shape shape, std::vector<double> value, const char* op, std::vector<std::shared_ptr<Node>> inputs,
            bool track, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  if (track) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
    Tape::active()->record(n);
  }
  return Tensor(std::move(n));
}

// b broadcasts against a if its shape is a suffix of a's shape.
bool broadcastable(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

template <class Fwd, class GradA, class GradB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, GradA ga, GradB gb) {
  if (!broadcastable(a.shape(), b.shape())) shape_fail(op, a.shape(), b.shape());
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  std::vector<double> out(na);
  const double* av = a.data().data();
  const double* bv = b.data().data();
  if (na == nb) {
    for (std::size_t i = 0; i < na; ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < na; ++i) out[i] = fwd(av[i], bv[i % nb]);
  }
  const bool track = any_grad({&a, &b});
  auto pa = a.ptr();
  auto pb = b.ptr();
  return make(a.shape(), std::move(out), op, {pa, pb}, track, [pa, pb, na, nb, ga, gb](Node& self) {
    const double* g = self.grad.data();
    const double* x = pa->value.data();
    const double* y = pb->value.data();
    if (pa->requires_grad) {
      auto& gx = pa->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) gx[i] += g[i] * ga(x[i], y[i % nb], self.value[i]);
    }
    if (pb->requires_grad) {
      auto& gy = pb->ensure_grad();
      for (std::size_t i = 0; i < na; ++i) gy[i % nb] += g[i] * gb(x[i], y[i % nb], self.value[i]);
    }
  });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  const double* av = a.data().data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(a.shape(), std::move(out), op, {pa}, track, [pa, n, deriv](Node& self) {
    auto& gx = pa->ensure_grad();
    const double* g = self.grad.data();
    const double* x = pa->value.data();
    const double* y = self.value.data();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * deriv(x[i], y[i]);
  });
}

Shape with_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

}  // namespace

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) shape_fail("matmul", x.shape(), w.shape());
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  const std::size_t m = x.numel() / k;
  std::vector<double> out(m * n);
  kernels::gemm(false, false, m, n, k, 1.0, x.data().data(), w.data().data(), 0.0, out.data());
  const bool track = any_grad({&x, &w});
  auto px = x.ptr();
  auto pw = w.ptr();
  return make(with_last(x.shape(), n), std::move(out), "matmul", {px, pw}, track, [px, pw, m, n, k](Node& self) {
    if (px->requires_grad) {
      kernels::gemm(false, true, m, k, n, 1.0, self.grad.data(), pw->value.data(), 1.0, px->ensure_grad().data());
    }
    if (pw->requires_grad) {
      kernels::gemm(true, false, k, n, m, 1.0, px->value.data(), self.grad.data(), 1.0, pw->ensure_grad().data());
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) shape_fail("linear", x.shape(), w.shape());
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) shape_fail("linear(bias)", w.shape(), b.shape());
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  const std::size_t m = x.numel() / k;
  std::vector<double> out(m * n);
  const double* bv = b.data().data();
  for (std::size_t i = 0; i < m; ++i) std::copy(bv, bv + n, out.begin() + static_cast<std::ptrdiff_t>(i * n));
  kernels::gemm(false, false, m, n, k, 1.0, x.data().data(), w.data().data(), 1.0, out.data());
  const bool track = any_grad({&x, &w, &b});
  auto px = x.ptr();
  auto pw = w.ptr();
  auto pb = b.ptr();
  return make(with_last(x.shape(), n), std::move(out), "linear", {px, pw, pb}, track,
              [px, pw, pb, m, n, k](Node& self) {
                if (px->requires_grad) {
                  kernels::gemm(false, true, m, k, n, 1.0, self.grad.data(), pw->value.data(), 1.0,
                                px->ensure_grad().data());
                }
                if (pw->requires_grad) {
                  kernels::gemm(true, false, k, n, m, 1.0, px->value.data(), self.grad.data(), 1.0,
                                pw->ensure_grad().data());
                }
                if (pb->requires_grad) {
                  kernels::column_sums(m, n, self.grad.data(), pb->ensure_grad().data());
                }
              });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) shape_fail("bmm", a.shape(), b.shape());
  const std::size_t batch = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  if ((trans_b ? b.dim(2) : b.dim(1)) != k) shape_fail("bmm", a.shape(), b.shape());
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  std::vector<double> out(batch * m * n);
  kernels::gemm_batched(false, trans_b, batch, m, n, k, 1.0, a.data().data(), b.data().data(), 0.0, out.data());
  const bool track = any_grad({&a, &b});
  auto pa = a.ptr();
  auto pb = b.ptr();
  return make({batch, m, n}, std::move(out), "bmm", {pa, pb}, track, [pa, pb, batch, m, n, k, trans_b](Node& self) {
    const double* g = self.grad.data();
    if (pa->requires_grad) {
      // dA = dC * op(B)^T
      kernels::gemm_batched(false, !trans_b, batch, m, k, n, 1.0, g, pb->value.data(), 1.0, pa->ensure_grad().data());
    }
    if (pb->requires_grad) {
      if (trans_b) {
        // B is [n, k]: dB = dC^T * A
        kernels::gemm_batched(true, false, batch, n, k, m, 1.0, g, pa->value.data(), 1.0, pb->ensure_grad().data());
      } else {
        // B is [k, n]: dB = A^T * dC
        kernels::gemm_batched(true, false, batch, k, n, m, 1.0, pa->value.data(), g, 1.0, pb->ensure_grad().data());
      }
    }
  });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  // Ties send the gradient to `a`.
  return binary(
      "minimum", a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return unary(
      "clamp_min", a, [lo](double x) { return std::max(x, lo); }, [lo](double x, double) { return x >= lo ? 1.0 : 0.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& a) {
  return unary(
      "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Tensor tanh(const Tensor& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make({1}, {s}, "sum", {pa}, track, [pa](Node& self) {
    auto& g = pa->ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const auto n = static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.data()) s += v;
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make({1}, {s / n}, "mean", {pa}, track, [pa, n](Node& self) {
    auto& g = pa->ensure_grad();
    for (double& v : g) v += self.grad[0] / n;
  });
}

Tensor sum_last(const Tensor& a) {
  const std::size_t n = a.dim(-1);
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(rows, 0.0);
  const double* av = a.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r] += av[r * n + c];
  }
  Shape s(a.shape().begin(), a.shape().end() - 1);
  if (s.empty()) s = {1};
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(std::move(s), std::move(out), "sum_last", {pa}, track, [pa, rows, n](Node& self) {
    auto& g = pa->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[r];
    }
  });
}

Tensor softmax_last(const Tensor& a) {
  const std::size_t n = a.dim(-1);
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(a.numel());
  const double* av = a.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      y[c] = std::exp(x[c] - mx);
      s += y[c];
    }
    for (std::size_t c = 0; c < n; ++c) y[c] /= s;
  }
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(a.shape(), std::move(out), "softmax", {pa}, track, [pa, rows, n](Node& self) {
    auto& g = pa->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* gy = self.grad.data() + r * n;
      double dotp = 0.0;
      for (std::size_t c = 0; c < n; ++c) dotp += gy[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (gy[c] - dotp);
    }
  });
}

Tensor layer_norm_last(const Tensor& a, double eps) {
  const std::size_t n = a.dim(-1);
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(a.numel());
  std::vector<double> inv_std(rows);
  const double* av = a.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += x[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = (x[c] - mu) * inv_std[r];
  }
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(a.shape(), std::move(out), "layer_norm", {pa}, track,
              [pa, rows, n, inv_std = std::move(inv_std)](Node& self) {
                auto& g = pa->ensure_grad();
                const auto fn = static_cast<double>(n);
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* y = self.value.data() + r * n;
                  const double* gy = self.grad.data() + r * n;
                  double mg = 0.0;
                  double mgy = 0.0;
                  for (std::size_t c = 0; c < n; ++c) {
                    mg += gy[c];
                    mgy += gy[c] * y[c];
                  }
                  mg /= fn;
                  mgy /= fn;
                  for (std::size_t c = 0; c < n; ++c) g[r * n + c] += inv_std[r] * (gy[c] - mg - y[c] * mgy);
                }
              });
}

// ---- shape ops ------------------------------------------------------------

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_last: no inputs");
  const Shape& s0 = parts.front().shape();
  const std::size_t rows = parts.front().numel() / s0.back();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    if (p.rank() != s0.size() || !std::equal(s0.begin(), s0.end() - 1, p.shape().begin())) {
      shape_fail("concat_last", s0, p.shape());
    }
    widths.push_back(p.dim(-1));
    total += widths.back();
  }
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double* src = parts[i].data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(src + r * widths[i], src + (r + 1) * widths[i], out.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    }
    off += widths[i];
  }
  bool track = false;
  std::vector<std::shared_ptr<Node>> inputs;
  for (const Tensor& p : parts) {
    track = track || (Tape::active() && p.requires_grad());
    inputs.push_back(p.ptr());
  }
  auto ins = inputs;
  return make(with_last(s0, total), std::move(out), "concat", std::move(inputs), track,
              [ins, widths, rows, total](Node& self) {
                std::size_t off = 0;
                for (std::size_t i = 0; i < ins.size(); ++i) {
                  if (ins[i]->requires_grad) {
                    auto& g = ins[i]->ensure_grad();
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < widths[i]; ++c) g[r * widths[i] + c] += self.grad[r * total + off + c];
                    }
                  }
                  off += widths[i];
                }
              });
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len) {
  const std::size_t n = a.dim(-1);
  if (start + len > n) {
    throw DimensionError("slice_last: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") outside last axis of " + shape_str(a.shape()));
  }
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(rows * len);
  const double* av = a.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av + r * n + start, av + r * n + start + len, out.begin() + static_cast<std::ptrdiff_t>(r * len));
  }
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(with_last(a.shape(), len), std::move(out), "slice", {pa}, track, [pa, rows, n, start, len](Node& self) {
    auto& g = pa->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < len; ++c) g[r * n + start + c] += self.grad[r * len + c];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (nn::numel(shape) != a.numel()) shape_fail("reshape", a.shape(), shape);
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make(std::move(shape), a.node()->value, "reshape", {pa}, track, [pa](Node& self) {
    auto& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  if (a.rank() != 3 || index.size() != a.dim(0)) {
    throw DimensionError("gather_rows: need [B, T, D] input and B indices, got " + shape_str(a.shape()) + " and " +
                         std::to_string(index.size()) + " indices");
  }
  const std::size_t batch = a.dim(0);
  const std::size_t t = a.dim(1);
  const std::size_t d = a.dim(2);
  std::vector<double> out(batch * d);
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t b = 0; b < batch; ++b) {
    if (idx[b] >= t) throw DimensionError("gather_rows: index out of range");
    const double* src = a.data().data() + (b * t + idx[b]) * d;
    std::copy(src, src + d, out.begin() + static_cast<std::ptrdiff_t>(b * d));
  }
  const bool track = any_grad({&a});
  auto pa = a.ptr();
  return make({batch, d}, std::move(out), "gather_rows", {pa}, track, [pa, idx, t, d](Node& self) {
    auto& g = pa->ensure_grad();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      for (std::size_t c = 0; c < d; ++c) g[(b * t + idx[b]) * d + c] += self.grad[b * d + c];
    }
  });
}

}  // namespace shadow::nn
