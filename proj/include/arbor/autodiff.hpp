// Reverse-mode automatic differentiation over dense double tensors.
//
// Operations record a backward closure on the thread's active Tape when at
// least one input requires a gradient. Without an active tape they only
// compute values, which is how inference runs.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace arbor::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_size(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows in
  bool requires_grad = false;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(std::vector<double> v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }

  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->shape[1] + c]; }

  /// Gradient; zeros if nothing has flowed in.
  std::vector<double> grad() const;
  std::vector<double>& mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
  friend Tensor wrap(std::shared_ptr<Node>);
};

Tensor wrap(std::shared_ptr<Node> n);

class Tape {
 public:
  void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }
  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  /// Seeds d(loss)/d(loss) = 1 and runs every record in reverse.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> records_;
  bool consumed_ = false;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// When on, every op rejects NaN inputs.
void set_debug_checks(bool on);
bool debug_checks();

// ---- linear algebra
/// [m×k]·[k] -> [m] or [m×k]·[k×n] -> [m×n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ·x for a [m×k], x [m] -> [k]
Tensor matmul_t(const Tensor& a, const Tensor& x);
/// W·x + b for W [m×k], x [k], b [m]
Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b);
/// Row-wise X·Wᵀ + b for X [n×k], W [m×k], b [m] -> [n×m]
Tensor linear_rows(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

// ---- elementwise
/// Same shapes, or a [m×n] + b [n] broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Scalar [1] repeated n times.
Tensor expand(const Tensor& s, std::size_t n);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

// ---- structure
Tensor concat(const std::vector<Tensor>& parts);  // 1-D pieces
Tensor stack(const std::vector<Tensor>& rows);    // 1-D rows of equal length -> 2-D
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);  // 1-D
Tensor row(const Tensor& m, std::size_t i);
Tensor reshape(const Tensor& a, Shape shape);
/// Elements at the given positions of a 1-D tensor.
Tensor pick(const Tensor& a, const std::vector<std::size_t>& positions);
/// Sliding windows of `width` rows, zero rows outside: [n×d] -> [n×(width·d)].
Tensor unfold(const Tensor& a, std::size_t width);

// ---- reductions
Tensor sum(const Tensor& a);
/// axis 0: [m×n] -> [n]; axis 1: [m×n] -> [m]
Tensor sum(const Tensor& a, std::size_t axis);
/// Max over rows: [m×n] -> [n]
Tensor reduce_max(const Tensor& a);
/// Over the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// ---- lookup / regularization
Tensor embedding(const Tensor& table, std::size_t id);
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids);
/// Inverted dropout; identity when !train or rate == 0.
Tensor dropout(const Tensor& a, double rate, bool train, std::mt19937_64& rng);

// ---- gradient checking
struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::vector<double> per_tensor_max;
};

/// Compares analytic gradients of the scalar `f` against central differences
/// on up to `samples_per_tensor` coordinates of each parameter.
GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double h,
                           std::size_t samples_per_tensor, std::mt19937_64& rng);

double rel_error(double analytic, double numeric);

}  // namespace arbor::ad
