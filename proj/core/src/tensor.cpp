#include "irsc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace irsc::diff {

namespace {

// Parallelizing only by output row keeps results bitwise identical for any
// thread count: each element is reduced sequentially by a single thread.
constexpr std::size_t kParallelFlops = 1u << 18;

void check_same_tape(const Tensor& a, const Tensor& b) {
  if (a.tape() != b.tape()) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(op) +
                               ": non-finite value in forward result");
    }
  }
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

const Shape& Tensor::shape() const { return tape_->shape_of(id_); }

std::size_t Tensor::size() const { return element_count(shape()); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.size() == 2 ? s[1] : (s.empty() ? 1 : s[0]);
}

std::span<const double> Tensor::value() const { return tape_->value_of(id_); }

std::span<const double> Tensor::grad() const {
  return static_cast<const Tape*>(tape_)->grad_of(id_);
}

double Tensor::scalar() const {
  if (size() != 1) {
    throw std::invalid_argument("scalar() on tensor of shape " +
                                shape_str(shape()));
  }
  return value()[0];
}

Tensor Tape::leaf(Shape shape, std::vector<double> values) {
  if (element_count(shape) != values.size()) {
    throw std::invalid_argument("leaf: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  }
  Node node;
  node.shape = std::move(shape);
  node.grad.assign(values.size(), 0.0);
  node.value = std::move(values);
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> values,
                    BackwardFn backward) {
  Tensor t = leaf(std::move(shape), std::move(values));
  nodes_[t.id()].backward = std::move(backward);
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) {
    throw std::invalid_argument("backward: loss from another tape");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  }
  for (Node& n : nodes_) {
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
  }
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

// ---- kernels --------------------------------------------------------------

void matmul_kernel(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelFlops)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ai[l];
      const double* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

void matmul_nt_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k,
                      bool accumulate) {
  // b arrives as [k x n]; transposing it first turns the row dot products
  // into the same stride-1 saxpy loop as the plain kernel.
  std::vector<double> bt(n * k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t l = 0; l < n; ++l) bt[l * k + j] = b[j * n + l];
  }
  if (!accumulate) std::fill(c, c + m * k, 0.0);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelFlops)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t l = 0; l < n; ++l) {
      const double av = ai[l];
      const double* btl = bt.data() + l * k;
      for (std::size_t j = 0; j < k; ++j) ci[j] += av * btl[j];
    }
  }
}

void matmul_tn_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, 0.0);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelFlops)
  for (std::int64_t l = 0; l < static_cast<std::int64_t>(k); ++l) {
    double* cl = c + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + l];
      const double* bi = b + i * n;
      for (std::size_t j = 0; j < n; ++j) cl[j] += av * bi[j];
    }
  }
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.cols() != b.rows()) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  matmul_kernel(a.value().data(), b.value().data(), out.data(), m, k, n,
                false);
  check_finite(out, "matmul");
  Tape& tape = *a.tape();
  const std::size_t ida = a.id(), idb = b.id();
  return tape.record(
      {m, n}, std::move(out), [ida, idb, m, k, n](Tape& t, std::size_t self) {
        const double* g = t.grad_of(self).data();
        // dL/da = g * b^T, dL/db = a^T * g
        matmul_nt_kernel(g, t.value_of(idb).data(), t.grad_of(ida).data(), m,
                         n, k, true);
        matmul_tn_kernel(t.value_of(ida).data(), g, t.grad_of(idb).data(), m,
                         k, n, true);
      });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  if (x.shape().size() != 2 || w.shape().size() != 2 ||
      x.cols() != w.rows()) {
    shape_error("affine", x.shape(), w.shape());
  }
  if (b.size() != w.cols()) {
    shape_error("affine bias", b.shape(), w.shape());
  }
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  std::vector<double> out(m * n);
  const double* bias = b.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(bias, bias + n, out.data() + i * n);
  }
  matmul_kernel(x.value().data(), w.value().data(), out.data(), m, k, n, true);
  check_finite(out, "affine");
  Tape& tape = *x.tape();
  const std::size_t idx = x.id(), idw = w.id(), idb = b.id();
  return tape.record(
      {m, n}, std::move(out),
      [idx, idw, idb, m, k, n](Tape& t, std::size_t self) {
        const double* g = t.grad_of(self).data();
        matmul_nt_kernel(g, t.value_of(idw).data(), t.grad_of(idx).data(), m,
                         n, k, true);
        matmul_tn_kernel(t.value_of(idx).data(), g, t.grad_of(idw).data(), m,
                         k, n, true);
        double* gb = t.grad_of(idb).data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = g + i * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += gi[j];
        }
      });
}

Tensor activation(const Tensor& x, Activation kind) {
  std::span<const double> v = x.value();
  std::vector<double> out(v.size());
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? v[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  }
  Tape& tape = *x.tape();
  const std::size_t idx = x.id();
  return tape.record(
      Shape(x.shape()), std::move(out),
      [idx, kind](Tape& t, std::size_t self) {
        std::span<const double> g = t.grad_of(self);
        std::span<const double> y = t.value_of(self);
        std::span<const double> in = t.value_of(idx);
        std::span<double> gx = t.grad_of(idx);
        if (kind == Activation::relu) {
          // relu'(0) = 0 convention
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (in[i] > 0.0) gx[i] += g[i];
          }
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += g[i] * (1.0 - y[i] * y[i]);
          }
        }
      });
}

Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
Tensor tanh_act(const Tensor& x) { return activation(x, Activation::tanh); }

Tensor concat_rows(const Tensor& x, const Tensor& y) {
  check_same_tape(x, y);
  if (x.rows() != y.rows()) {
    shape_error("concat_rows", x.shape(), y.shape());
  }
  const std::size_t m = x.rows(), a = x.cols(), b = y.cols();
  std::vector<double> out(m * (a + b));
  const double* xv = x.value().data();
  const double* yv = y.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(xv + i * a, xv + (i + 1) * a, out.data() + i * (a + b));
    std::copy(yv + i * b, yv + (i + 1) * b, out.data() + i * (a + b) + a);
  }
  Tape& tape = *x.tape();
  const std::size_t idx = x.id(), idy = y.id();
  return tape.record(
      {m, a + b}, std::move(out),
      [idx, idy, m, a, b](Tape& t, std::size_t self) {
        std::span<const double> g = t.grad_of(self);
        std::span<double> gx = t.grad_of(idx);
        std::span<double> gy = t.grad_of(idy);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < a; ++j) {
            gx[i * a + j] += g[i * (a + b) + j];
          }
          for (std::size_t j = 0; j < b; ++j) {
            gy[i * b + j] += g[i * (a + b) + a + j];
          }
        }
      });
}

Tensor l2_normalize_scale(const Tensor& x, double target_norm) {
  if (target_norm <= 0.0) {
    throw std::invalid_argument("l2_normalize_scale: target must be positive");
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::span<const double> v = x.value();
  std::vector<double> out(v.size());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) sq += v[i * n + j] * v[i * n + j];
    const double norm = std::sqrt(sq);
    if (norm == 0.0) {
      throw std::runtime_error(
          "l2_normalize_scale: degenerate zero-norm row " + std::to_string(i));
    }
    norms[i] = norm;
    const double s = target_norm / norm;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = s * v[i * n + j];
  }
  Tape& tape = *x.tape();
  const std::size_t idx = x.id();
  return tape.record(
      Shape(x.shape()), std::move(out),
      [idx, m, n, target_norm, norms = std::move(norms)](Tape& t,
                                                         std::size_t self) {
        std::span<const double> g = t.grad_of(self);
        std::span<const double> in = t.value_of(idx);
        std::span<double> gx = t.grad_of(idx);
        for (std::size_t i = 0; i < m; ++i) {
          const double norm = norms[i];
          double dot = 0.0;  // g . xhat
          for (std::size_t j = 0; j < n; ++j) {
            dot += g[i * n + j] * in[i * n + j] / norm;
          }
          const double s = target_norm / norm;
          for (std::size_t j = 0; j < n; ++j) {
            const double xhat = in[i * n + j] / norm;
            gx[i * n + j] += s * (g[i * n + j] - dot * xhat);
          }
        }
      });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  check_same_tape(pred, target);
  if (pred.shape() != target.shape()) {
    shape_error("mse_loss", pred.shape(), target.shape());
  }
  std::span<const double> p = pred.value();
  std::span<const double> q = target.value();
  const double inv = 1.0 / static_cast<double>(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    acc += d * d;
  }
  Tape& tape = *pred.tape();
  const std::size_t idp = pred.id(), idq = target.id();
  return tape.record(
      {1}, {acc * inv}, [idp, idq, inv](Tape& t, std::size_t self) {
        const double g = t.grad_of(self)[0];
        std::span<const double> p = t.value_of(idp);
        std::span<const double> q = t.value_of(idq);
        std::span<double> gp = t.grad_of(idp);
        std::span<double> gq = t.grad_of(idq);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = 2.0 * inv * (p[i] - q[i]) * g;
          gp[i] += d;
          gq[i] -= d;
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b);
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::span<const double> av = a.value();
  std::span<const double> bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  Tape& tape = *a.tape();
  const std::size_t ida = a.id(), idb = b.id();
  return tape.record(Shape(a.shape()), std::move(out),
                     [ida, idb](Tape& t, std::size_t self) {
                       std::span<const double> g = t.grad_of(self);
                       std::span<double> ga = t.grad_of(ida);
                       std::span<double> gb = t.grad_of(idb);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         ga[i] += g[i];
                         gb[i] += g[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double c) {
  std::span<const double> av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = c * av[i];
  Tape& tape = *a.tape();
  const std::size_t ida = a.id();
  return tape.record(Shape(a.shape()), std::move(out),
                     [ida, c](Tape& t, std::size_t self) {
                       std::span<const double> g = t.grad_of(self);
                       std::span<double> ga = t.grad_of(ida);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         ga[i] += c * g[i];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  std::span<const double> v = x.value();
  double acc = 0.0;
  for (double e : v) acc += e;
  Tape& tape = *x.tape();
  const std::size_t idx = x.id();
  return tape.record({1}, {acc}, [idx](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    std::span<double> gx = t.grad_of(idx);
    for (double& e : gx) e += g;
  });
}

}  // namespace irsc::diff
