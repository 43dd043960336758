#include "arbor/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "arbor/graph.hpp"

namespace arbor::ad {
namespace {

thread_local Tape* g_tape = nullptr;
std::atomic<bool> g_debug{false};

using NodePtr = std::shared_ptr<Node>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a) {
  throw ValidationError(std::string(op) + ": unsupported shape " + shape_str(a));
}

void check_nan(const char* op, const Tensor& t) {
  if (!g_debug.load(std::memory_order_relaxed)) return;
  for (double v : t.value())
    if (std::isnan(v)) throw ValidationError(std::string(op) + ": NaN input");
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (!g_tape) return false;
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

bool tracking(const std::vector<Tensor>& inputs) {
  if (!g_tape) return false;
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

/// Registers `fn(out_grad)` to run during backward.
template <class F>
void record(const Tensor& out, F fn) {
  out.node()->requires_grad = true;
  g_tape->record([o = out.node(), fn = std::move(fn)]() mutable {
    if (!o->grad.empty()) fn(o->grad);
  });
}

/// Gradient buffer of an input, or nullptr if it does not need one.
std::vector<double>* grad_of(const NodePtr& n) { return n->requires_grad ? &n->ensure_grad() : nullptr; }

Tensor unary(const char* op, const Tensor& a, double (*f)(double),
             double (*df)(double x, double y)) {
  check_nan(op, a);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(a[i]);
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), on = out.node(), df](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * df(an->value[i], on->value[i]);
    });
  }
  return out;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) : node_(std::make_shared<Node>()) {
  if (shape_size(shape) != values.size() || shape.empty())
    throw ValidationError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

Tensor Tensor::vector(std::vector<double> v, bool requires_grad) {
  auto n = v.size();
  return Tensor({n}, std::move(v), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ValidationError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("backward: tape already consumed; record the computation again");
  if (loss.size() != 1) throw ValidationError("backward: loss of shape " + shape_str(loss.shape()) + " is not a scalar");
  consumed_ = true;
  if (!loss.requires_grad()) {
    records_.clear();
    return;
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  records_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = previous_; }
NoGradScope::NoGradScope() : previous_(g_tape) { g_tape = nullptr; }
NoGradScope::~NoGradScope() { g_tape = previous_; }

Tape* active_tape() { return g_tape; }
void set_debug_checks(bool on) { g_debug = on; }
bool debug_checks() { return g_debug; }

// ---------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_nan("matmul", a);
  check_nan("matmul", b);
  if (a.rank() != 2) shape_error("matmul", a.shape(), b.shape());
  const auto m = a.dim(0), k = a.dim(1);
  if (b.rank() == 1) {
    if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> y(m, 0.0);
    const auto& A = a.value();
    const auto& x = b.value();
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* r = &A[i * k];
      for (std::size_t j = 0; j < k; ++j) s += r[j] * x[j];
      y[i] = s;
    }
    Tensor out({m}, std::move(y));
    if (tracking({&a, &b})) {
      record(out, [an = a.node(), bn = b.node(), m, k](const std::vector<double>& g) {
        if (auto* ga = grad_of(an))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) (*ga)[i * k + j] += g[i] * bn->value[j];
        if (auto* gb = grad_of(bn))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) (*gb)[j] += g[i] * an->value[i * k + j];
      });
    }
    return out;
  }
  if (b.rank() != 2 || b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
  const auto n = b.dim(1);
  std::vector<double> c(m * n, 0.0);
  const auto& A = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * B[p * n + j];
    }
  Tensor out({m, n}, std::move(c));
  if (tracking({&a, &b})) {
    record(out, [an = a.node(), bn = b.node(), m, k, n](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bn->value[p * n + j];
            (*ga)[i * k + p] += s;
          }
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = an->value[i * k + p];
            for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += av * g[i * n + j];
          }
    });
  }
  return out;
}

Tensor matmul_t(const Tensor& a, const Tensor& x) {
  check_nan("matmul_t", a);
  check_nan("matmul_t", x);
  if (a.rank() != 2 || x.rank() != 1 || x.dim(0) != a.dim(0)) shape_error("matmul_t", a.shape(), x.shape());
  const auto m = a.dim(0), k = a.dim(1);
  std::vector<double> y(k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = x[i];
    const double* r = &a.value()[i * k];
    for (std::size_t j = 0; j < k; ++j) y[j] += r[j] * xi;
  }
  Tensor out({k}, std::move(y));
  if (tracking({&a, &x})) {
    record(out, [an = a.node(), xn = x.node(), m, k](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) (*ga)[i * k + j] += xn->value[i] * g[j];
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < m; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += an->value[i * k + j] * g[j];
          (*gx)[i] += s;
        }
    });
  }
  return out;
}

Tensor linear(const Tensor& w, const Tensor& x, const Tensor& b) {
  check_nan("linear", w);
  check_nan("linear", x);
  check_nan("linear", b);
  if (w.rank() != 2 || x.rank() != 1 || x.dim(0) != w.dim(1)) shape_error("linear", w.shape(), x.shape());
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) shape_error("linear", w.shape(), b.shape());
  const auto m = w.dim(0), k = w.dim(1);
  std::vector<double> y(b.value());
  const auto& W = w.value();
  const auto& xv = x.value();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* r = &W[i * k];
    for (std::size_t j = 0; j < k; ++j) s += r[j] * xv[j];
    y[i] += s;
  }
  Tensor out({m}, std::move(y));
  if (tracking({&w, &x, &b})) {
    record(out, [wn = w.node(), xn = x.node(), bn = b.node(), m, k](const std::vector<double>& g) {
      if (auto* gw = grad_of(wn))
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* r = &(*gw)[i * k];
          for (std::size_t j = 0; j < k; ++j) r[j] += gi * xn->value[j];
        }
      if (auto* gx = grad_of(xn))
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* r = &wn->value[i * k];
          for (std::size_t j = 0; j < k; ++j) (*gx)[j] += gi * r[j];
        }
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < m; ++i) (*gb)[i] += g[i];
    });
  }
  return out;
}

Tensor linear_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_nan("linear_rows", x);
  check_nan("linear_rows", w);
  check_nan("linear_rows", b);
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) shape_error("linear_rows", x.shape(), w.shape());
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) shape_error("linear_rows", w.shape(), b.shape());
  const auto n = x.dim(0), k = x.dim(1), m = w.dim(0);
  std::vector<double> y(n * m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) {
      double s = b[i];
      const double* xr = &x.value()[r * k];
      const double* wr = &w.value()[i * k];
      for (std::size_t j = 0; j < k; ++j) s += xr[j] * wr[j];
      y[r * m + i] = s;
    }
  Tensor out({n, m}, std::move(y));
  if (tracking({&x, &w, &b})) {
    record(out, [xn = x.node(), wn = w.node(), bn = b.node(), n, k, m](const std::vector<double>& g) {
      auto* gx = grad_of(xn);
      auto* gw = grad_of(wn);
      auto* gb = grad_of(bn);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[r * m + i];
          if (gi == 0.0) continue;
          if (gx)
            for (std::size_t j = 0; j < k; ++j) (*gx)[r * k + j] += gi * wn->value[i * k + j];
          if (gw)
            for (std::size_t j = 0; j < k; ++j) (*gw)[i * k + j] += gi * xn->value[r * k + j];
          if (gb) (*gb)[i] += gi;
        }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) shape_error("transpose", a.shape());
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> t(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  Tensor out({n, m}, std::move(t));
  if (tracking({&a})) {
    record(out, [an = a.node(), m, n](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  check_nan("dot", a);
  check_nan("dot", b);
  if (a.shape() != b.shape()) shape_error("dot", a.shape(), b.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  Tensor out = Tensor::scalar(s);
  if (tracking({&a, &b})) {
    record(out, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0] * bn->value[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[0] * an->value[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_nan("add", a);
  check_nan("add", b);
  if (a.shape() == b.shape()) {
    std::vector<double> v(a.value());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i];
    Tensor out(a.shape(), std::move(v));
    if (tracking({&a, &b})) {
      record(out, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
        if (auto* ga = grad_of(an))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = grad_of(bn))
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
      });
    }
    return out;
  }
  if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) {
    const auto m = a.dim(0), n = a.dim(1);
    std::vector<double> v(a.value());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] += b[j];
    Tensor out(a.shape(), std::move(v));
    if (tracking({&a, &b})) {
      record(out, [an = a.node(), bn = b.node(), m, n](const std::vector<double>& g) {
        if (auto* ga = grad_of(an))
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        if (auto* gb = grad_of(bn))
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g[i * n + j];
      });
    }
    return out;
  }
  shape_error("add", a.shape(), b.shape());
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_nan("sub", a);
  check_nan("sub", b);
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b[i];
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a, &b})) {
    record(out, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_nan("mul", a);
  check_nan("mul", b);
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= b[i];
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a, &b})) {
    record(out, [an = a.node(), bn = b.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bn->value[i];
      if (auto* gb = grad_of(bn))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * an->value[i];
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  check_nan("scale", a);
  std::vector<double> v(a.value());
  for (auto& x : v) x *= s;
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), s](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * s;
    });
  }
  return out;
}

Tensor expand(const Tensor& s, std::size_t n) {
  check_nan("expand", s);
  if (s.size() != 1) shape_error("expand", s.shape());
  Tensor out({n}, std::vector<double>(n, s[0]));
  if (tracking({&s})) {
    record(out, [sn = s.node()](const std::vector<double>& g) {
      if (auto* gs = grad_of(sn))
        for (double x : g) (*gs)[0] += x;
    });
  }
  return out;
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor elu(const Tensor& a) {
  return unary("elu", a, [](double x) { return x > 0 ? x : std::expm1(x); },
               [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

namespace {

Tensor select_between(const char* op, const Tensor& a, const Tensor& b, bool take_max) {
  check_nan(op, a);
  check_nan(op, b);
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
  std::vector<double> v(a.size());
  std::vector<bool> from_a(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    from_a[i] = take_max ? a[i] >= b[i] : a[i] <= b[i];
    v[i] = from_a[i] ? a[i] : b[i];
  }
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a, &b})) {
    record(out, [an = a.node(), bn = b.node(), from_a = std::move(from_a)](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      auto* gb = grad_of(bn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (from_a[i]) {
          if (ga) (*ga)[i] += g[i];
        } else if (gb) {
          (*gb)[i] += g[i];
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor maximum(const Tensor& a, const Tensor& b) { return select_between("maximum", a, b, true); }
Tensor minimum(const Tensor& a, const Tensor& b) { return select_between("minimum", a, b, false); }

// ---------------------------------------------------------------- structure

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  std::vector<double> v;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    check_nan("concat", p);
    if (p.rank() != 1) shape_error("concat", p.shape());
    offsets.push_back(v.size());
    v.insert(v.end(), p.value().begin(), p.value().end());
  }
  const auto n = v.size();
  Tensor out({n}, std::move(v));
  if (tracking(parts)) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    record(out, [nodes = std::move(nodes), offsets = std::move(offsets)](const std::vector<double>& g) {
      for (std::size_t k = 0; k < nodes.size(); ++k)
        if (auto* gp = grad_of(nodes[k]))
          for (std::size_t i = 0; i < gp->size(); ++i) (*gp)[i] += g[offsets[k] + i];
    });
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ValidationError("stack: no inputs");
  const auto n = rows.front().size();
  std::vector<double> v;
  v.reserve(rows.size() * n);
  for (const auto& r : rows) {
    check_nan("stack", r);
    if (r.rank() != 1 || r.size() != n) shape_error("stack", rows.front().shape(), r.shape());
    v.insert(v.end(), r.value().begin(), r.value().end());
  }
  Tensor out({rows.size(), n}, std::move(v));
  if (tracking(rows)) {
    std::vector<NodePtr> nodes;
    for (const auto& r : rows) nodes.push_back(r.node());
    record(out, [nodes = std::move(nodes), n](const std::vector<double>& g) {
      for (std::size_t k = 0; k < nodes.size(); ++k)
        if (auto* gp = grad_of(nodes[k]))
          for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[k * n + i];
    });
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() != 1 || begin >= end || end > a.size())
    throw ValidationError("slice: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                          shape_str(a.shape()));
  Tensor out({end - begin}, std::vector<double>(a.value().begin() + static_cast<std::ptrdiff_t>(begin),
                                                a.value().begin() + static_cast<std::ptrdiff_t>(end)));
  if (tracking({&a})) {
    record(out, [an = a.node(), begin](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[begin + i] += g[i];
    });
  }
  return out;
}

Tensor row(const Tensor& m, std::size_t i) {
  if (m.rank() != 2 || i >= m.dim(0))
    throw ValidationError("row: index " + std::to_string(i) + " of " + shape_str(m.shape()));
  const auto n = m.dim(1);
  Tensor out({n}, std::vector<double>(m.value().begin() + static_cast<std::ptrdiff_t>(i * n),
                                      m.value().begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
  if (tracking({&m})) {
    record(out, [mn = m.node(), i, n](const std::vector<double>& g) {
      if (auto* gm = grad_of(mn))
        for (std::size_t j = 0; j < n; ++j) (*gm)[i * n + j] += g[j];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  Tensor out(std::move(shape), a.value());
  if (tracking({&a})) {
    record(out, [an = a.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    });
  }
  return out;
}

Tensor pick(const Tensor& a, const std::vector<std::size_t>& positions) {
  if (a.rank() != 1 || positions.empty()) shape_error("pick", a.shape());
  std::vector<double> v;
  for (auto p : positions) {
    if (p >= a.size()) throw ValidationError("pick: position " + std::to_string(p) + " of " + shape_str(a.shape()));
    v.push_back(a[p]);
  }
  const auto count = v.size();
  Tensor out({count}, std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), positions](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < positions.size(); ++i) (*ga)[positions[i]] += g[i];
    });
  }
  return out;
}

Tensor unfold(const Tensor& a, std::size_t width) {
  if (a.rank() != 2 || width % 2 == 0) shape_error("unfold", a.shape());
  const auto n = a.dim(0), d = a.dim(1);
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  std::vector<double> v(n * width * d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t w = 0; w < width; ++w) {
      auto src = static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(w) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      std::copy_n(a.value().begin() + src * static_cast<std::ptrdiff_t>(d), d,
                  v.begin() + static_cast<std::ptrdiff_t>((r * width + w) * d));
    }
  Tensor out({n, width * d}, std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), n, d, width, half](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t w = 0; w < width; ++w) {
          auto src = static_cast<std::ptrdiff_t>(r) + static_cast<std::ptrdiff_t>(w) - half;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
          for (std::size_t j = 0; j < d; ++j)
            (*ga)[static_cast<std::size_t>(src) * d + j] += g[(r * width + w) * d + j];
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& a) {
  check_nan("sum", a);
  double s = 0.0;
  for (double x : a.value()) s += x;
  Tensor out = Tensor::scalar(s);
  if (tracking({&a})) {
    record(out, [an = a.node()](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (auto& x : *ga) x += g[0];
    });
  }
  return out;
}

Tensor sum(const Tensor& a, std::size_t axis) {
  check_nan("sum", a);
  if (a.rank() != 2 || axis > 1) shape_error("sum", a.shape());
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> v(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) v[axis == 0 ? j : i] += a[i * n + j];
  const auto len = v.size();
  Tensor out({len}, std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), m, n, axis](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[axis == 0 ? j : i];
    });
  }
  return out;
}

Tensor reduce_max(const Tensor& a) {
  check_nan("reduce_max", a);
  if (a.rank() != 2 || a.dim(0) == 0) shape_error("reduce_max", a.shape());
  const auto m = a.dim(0), n = a.dim(1);
  std::vector<double> v(n);
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = a[j];
    for (std::size_t i = 1; i < m; ++i)
      if (a[i * n + j] > v[j]) {
        v[j] = a[i * n + j];
        arg[j] = i;
      }
  }
  Tensor out({n}, std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), arg = std::move(arg), n](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t j = 0; j < n; ++j) (*ga)[arg[j] * n + j] += g[j];
    });
  }
  return out;
}

namespace {

// Rows of the last axis.
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& a, const char* op) {
  if (a.rank() == 1) return {1, a.dim(0)};
  if (a.rank() == 2) return {a.dim(0), a.dim(1)};
  shape_error(op, a.shape());
}

}  // namespace

Tensor softmax(const Tensor& a) {
  check_nan("softmax", a);
  const auto [m, n] = rows_cols(a, "softmax");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = &a.value()[i * n];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (v[i * n + j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] /= z;
  }
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), on = out.node(), m = m, n = n](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * on->value[i * n + j];
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += on->value[i * n + j] * (g[i * n + j] - s);
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& a) {
  check_nan("log_softmax", a);
  const auto [m, n] = rows_cols(a, "log_softmax");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = &a.value()[i * n];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = x[j] - lse;
  }
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), on = out.node(), m = m, n = n](const std::vector<double>& g) {
      auto* ga = grad_of(an);
      if (!ga) return;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j];
        for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[i * n + j] - std::exp(on->value[i * n + j]) * s;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- lookup

Tensor embedding(const Tensor& table, std::size_t id) { return row(table, id); }

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
  if (table.rank() != 2 || ids.empty()) shape_error("gather_rows", table.shape());
  const auto d = table.dim(1);
  std::vector<double> v(ids.size() * d);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= table.dim(0))
      throw ValidationError("gather_rows: id " + std::to_string(ids[k]) + " of " + shape_str(table.shape()));
    std::copy_n(table.value().begin() + static_cast<std::ptrdiff_t>(ids[k] * d), d,
                v.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  Tensor out({ids.size(), d}, std::move(v));
  if (tracking({&table})) {
    record(out, [tn = table.node(), ids, d](const std::vector<double>& g) {
      if (auto* gt = grad_of(tn))
        for (std::size_t k = 0; k < ids.size(); ++k)
          for (std::size_t j = 0; j < d; ++j) (*gt)[ids[k] * d + j] += g[k * d + j];
    });
  }
  return out;
}

Tensor dropout(const Tensor& a, double rate, bool train, std::mt19937_64& rng) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw ValidationError("dropout: rate must be below 1");
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = coin(rng) ? 1.0 / keep : 0.0;
  std::vector<double> v(a.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
  Tensor out(a.shape(), std::move(v));
  if (tracking({&a})) {
    record(out, [an = a.node(), mask = std::move(mask)](const std::vector<double>& g) {
      if (auto* ga = grad_of(an))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------- grad check

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double h,
                           std::size_t samples_per_tensor, std::mt19937_64& rng) {
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    auto loss = f();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  GradCheckReport report;
  report.per_tensor_max.assign(params.size(), 0.0);
  NoGradScope no_grad;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& values = const_cast<Tensor&>(params[t]).mutable_value();
    // Prefer coordinates with a visible gradient; flat ones only compare
    // round-off noise.
    std::vector<std::size_t> live, flat;
    for (std::size_t i = 0; i < values.size(); ++i) (std::abs(analytic[t][i]) > 1e-6 ? live : flat).push_back(i);
    std::shuffle(live.begin(), live.end(), rng);
    std::shuffle(flat.begin(), flat.end(), rng);
    std::vector<std::size_t> chosen(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(
                                                                      std::min(live.size(), samples_per_tensor)));
    for (std::size_t k = 0; chosen.size() < samples_per_tensor && k < flat.size(); ++k) chosen.push_back(flat[k]);
    for (auto i : chosen) {
      const double orig = values[i];
      values[i] = orig + h;
      const double fp = f().item();
      values[i] = orig - h;
      const double fm = f().item();
      values[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double err = rel_error(analytic[t][i], numeric);
      ++report.checked;
      report.per_tensor_max[t] = std::max(report.per_tensor_max[t], err);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = t;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace arbor::ad
