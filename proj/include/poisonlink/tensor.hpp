#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poisonlink/rng.hpp"

namespace poisonlink {

struct TensorNode;

// Dense 64-bit real tensor participating in a dynamically built reverse-mode
// graph. Copying a Tensor copies the handle, not the storage; clone() copies
// the data. Ops record parents and a backward closure only while gradients
// are globally enabled and some input requires them.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng);

  const std::vector<int>& shape() const;
  int ndim() const;
  long size() const;
  int dim(int i) const;

  const std::vector<double>& value() const;
  std::vector<double>& value_mut();
  double item() const;  // size-1 tensors only
  double at(int i) const;
  double at(int i, int j) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  const std::vector<double>& grad() const;  // throws if not taped
  void zero_grad();

  // Runs reverse-mode accumulation from this scalar.
  void backward();

  // Detached value-copy (fresh storage, no graph, no grad flag).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<TensorNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;  // reads this->grad, accumulates into parents
};

// Scoped switch that disables graph construction (inference paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// ---- elementwise / linear algebra ----
Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& b);   // a: [m,n], b: [n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);       // [m,k] x [k,n]
Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor concat_cols(const std::vector<Tensor>& parts);  // 2-D, along axis 1
Tensor reshape(const Tensor& x, std::vector<int> new_shape);

// Mean negative log-likelihood of per-row probability vectors against class
// indices. Probabilities are clamped at 1e-12 inside the log; clamped entries
// get zero gradient.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

// ---- conv / norm (NCHW) ----
Tensor conv2d_3x3(const Tensor& x, const Tensor& w);   // pad 1, stride 1, no bias
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean, std::vector<double>& running_var,
                    bool training, double momentum = 0.1, double eps = 1e-5);
Tensor global_avg_pool(const Tensor& x);               // [N,C,H,W] -> [N,C]

// Gradient of a scalar loss w.r.t. `input`, parameters untouched. The input
// must already be taped (requires_grad); all grads accumulated on the graph
// during the call are cleared again before returning.
Tensor input_grad(Tensor& input, const std::function<Tensor(const Tensor&)>& loss_of_input);

// C[m,n] += A[m,k] * B[k,n], row-major. Exposed for reuse by conv paths and
// benchmarks; accumulation order per output element is fixed, so results are
// invariant to row placement.
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n);
void gemm_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n);  // C[k,n] += A^T B, a:[m,k] b:[m,n]
void gemm_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n);  // C[m,k] += A B^T, a:[m,n] b:[k,n]

std::string shape_str(const std::vector<int>& shape);

}  // namespace poisonlink
