#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace irsc::diff {

// Dense real tensors (1-D or 2-D, row-major) recorded on a Tape for
// reverse-mode differentiation. Tensors are cheap handles; values and
// gradients live on the tape.

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  std::size_t size() const;
  // 2-D views: a 1-D tensor of n elements reads as 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> value() const;
  // Valid after Tape::backward; zero for nodes the loss does not reach.
  std::span<const double> grad() const;
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only operation record. Nodes are stored in execution order, so the
// list is always topologically sorted; one reverse sweep propagates the
// gradient of a scalar loss to every node, accumulating additively at
// fan-out points.
class Tape {
 public:
  // Called during the reverse sweep with the tape and the node's own id;
  // reads grad_of(self) and accumulates into the grads of its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tensor leaf(Shape shape, std::vector<double> values);
  Tensor record(Shape shape, std::vector<double> values, BackwardFn backward);

  // Propagates from `loss` (must be scalar) to every reachable node.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> value_of(std::size_t id) const {
    return nodes_[id].value;
  }
  std::span<double> grad_of(std::size_t id) { return nodes_[id].grad; }
  std::span<const double> grad_of(std::size_t id) const {
    return nodes_[id].grad;
  }

 private:
  friend class Tensor;
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;  // empty for leaves
  };
  std::vector<Node> nodes_;
};

// ---- Operations ----------------------------------------------------------

enum class Activation { relu, tanh };

Tensor matmul(const Tensor& a, const Tensor& b);
// x [batch x d_in] * w [d_in x d_out] + b [d_out] broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor activation(const Tensor& x, Activation kind);
Tensor relu(const Tensor& x);
Tensor tanh_act(const Tensor& x);
// Rows of x followed by rows of y, column-wise: [batch x (a+b)].
Tensor concat_rows(const Tensor& x, const Tensor& y);
// Scales every row to L2 norm target_norm; rows of zero norm are an error.
Tensor l2_normalize_scale(const Tensor& x, double target_norm);
// Mean of squared differences over every element (batch and feature dims).
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& x);

// ---- Raw kernels (used by ops and by the channel layer) ------------------

// c [m x n] = a [m x k] * b [k x n]; accumulates when `accumulate` is set.
void matmul_kernel(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate);
// c [m x k] = a [m x n] * b^T, b is [k x n].
void matmul_nt_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k,
                      bool accumulate);
// c [k x n] = a^T * b, a is [m x k], b is [m x n].
void matmul_tn_kernel(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate);

}  // namespace irsc::diff
