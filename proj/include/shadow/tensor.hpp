#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shadow::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node;

/// Dense row-major f64 tensor with an optional gradient. Copies share storage;
/// use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v) { return from({1}, {v}); }

  const Shape& shape() const;
  std::size_t dim(int i) const;  ///< negative i counts from the back
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  /// Gradient buffer; empty until backward() touches this tensor.
  std::span<double> grad();
  std::span<const double> grad() const;
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool v);
  double item() const;

  /// Same values, detached from the tape.
  Tensor detach() const;
  Tensor clone() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  /// Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// Ordered record of differentiable operations.
///
/// Operations are recorded while a Tape::Scope is alive on the current thread
/// and at least one input requires a gradient. backward() walks the record in
/// reverse, so each node is visited once after all of its consumers.
class Tape {
 public:
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  void record(std::shared_ptr<Node> n) { nodes_.push_back(std::move(n)); }
  /// Seeds d(loss)/d(loss) = 1 (loss must hold one element) and back-propagates.
  void backward(const Tensor& loss);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  static Tape* active();

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

// ---- operations -----------------------------------------------------------
// Shapes are checked eagerly; mismatches throw DimensionError naming both shapes.

/// x[..., k] * w[k, n] -> [..., n]
Tensor matmul(const Tensor& x, const Tensor& w);
/// x[..., k] * w[k, n] + b[n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// a[B, m, k] * b[B, k, n] (or b^T when trans_b, b[B, n, k]) -> [B, m, n]
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

/// Elementwise; `b` may also match a trailing sub-shape of `a` (broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor clamp_min(const Tensor& a, double lo);

Tensor relu(const Tensor& a);
Tensor elu(const Tensor& a);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduces the last axis: [..., n] -> [...] (a rank-1 input gives shape [1]).
Tensor sum_last(const Tensor& a);
Tensor softmax_last(const Tensor& a);
/// Normalizes the last axis to zero mean, unit variance (eps inside the sqrt).
Tensor layer_norm_last(const Tensor& a, double eps = 1e-5);

Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& a, Shape shape);
/// a[B, T, D], one row index per batch entry -> [B, D]
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

}  // namespace shadow::nn
