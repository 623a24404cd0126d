#include "poisonlink/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace poisonlink {

namespace {

thread_local bool g_grad_enabled = true;

long shape_size(const std::vector<int>& shape) {
  long n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> value) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

bool any_requires(const std::vector<Tensor>& ts) {
  for (const auto& t : ts)
    if (t.requires_grad()) return true;
  return false;
}

void ensure_grad_buf(TensorNode& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

// Wires the output node into the graph when grads are enabled. `back` sees the
// finished output node and accumulates into parents that require grad.
Tensor finish_op(std::shared_ptr<TensorNode> out, const std::vector<Tensor>& inputs,
                 std::function<void(TensorNode&)> back) {
  if (g_grad_enabled && any_requires(inputs)) {
    out->requires_grad = true;
    ensure_grad_buf(*out);
    out->parents.reserve(inputs.size());
    for (const auto& t : inputs) out->parents.push_back(t.node());
    out->backprop = std::move(back);
  }
  return Tensor(std::move(out));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Tensor() : node_(make_node({1}, {0.0})) {}

Tensor Tensor::zeros(std::vector<int> shape) {
  long n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  long n = shape_size(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  if (shape_size(shape) != static_cast<long>(data.size()))
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  return Tensor(make_node(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double v) { return Tensor(make_node({1}, {v})); }

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
  long n = shape_size(shape);
  std::vector<double> d(n);
  for (auto& x : d) x = rng.uniform(lo, hi);
  return Tensor(make_node(std::move(shape), std::move(d)));
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }
long Tensor::size() const { return static_cast<long>(node_->value.size()); }
int Tensor::dim(int i) const { return node_->shape.at(i); }

const std::vector<double>& Tensor::value() const { return node_->value; }
std::vector<double>& Tensor::value_mut() { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on tensor of size " + std::to_string(size()));
  return node_->value[0];
}

double Tensor::at(int i) const { return node_->value.at(i); }

double Tensor::at(int i, int j) const {
  if (ndim() != 2) throw std::invalid_argument("at(i,j) on non-matrix " + shape_str(shape()));
  return node_->value.at(static_cast<size_t>(i) * dim(1) + j);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on)
    ensure_grad_buf(*node_);
  else
    node_->grad.clear();
}

const std::vector<double>& Tensor::grad() const {
  if (!node_->requires_grad) throw std::logic_error("grad() on tensor that is not taped");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(make_node(node_->shape, node_->value));
}

namespace {

void topo_collect(TensorNode* root, std::vector<TensorNode*>& order) {
  // iterative post-order DFS over parents
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void Tensor::backward() {
  if (size() != 1) throw std::invalid_argument("backward() requires a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) throw std::logic_error("backward() on tensor that is not taped");
  std::vector<TensorNode*> order;
  topo_collect(node_.get(), order);
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

Tensor input_grad(Tensor& input, const std::function<Tensor(const Tensor&)>& loss_of_input) {
  if (!input.requires_grad())
    throw std::logic_error("input_grad: input does not participate in the tape");
  input.zero_grad();
  Tensor loss = loss_of_input(input);
  if (loss.size() != 1) throw std::invalid_argument("input_grad: loss must be scalar");
  loss.backward();
  Tensor g = Tensor::from(input.shape(), input.grad());
  // leave the graph clean: clear every grad this backward touched
  std::vector<TensorNode*> order;
  topo_collect(loss.node().get(), order);
  for (TensorNode* n : order)
    if (n->requires_grad) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  return g;
}

// ---------------------------------------------------------------- gemm ----

void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double *a0 = a + static_cast<size_t>(i) * k, *a1 = a0 + k, *a2 = a1 + k, *a3 = a2 + k;
    double *c0 = c + static_cast<size_t>(i) * n, *c1 = c0 + n, *c2 = c1 + n, *c3 = c2 + n;
    for (int p = 0; p < k; ++p) {
      const double* br = b + static_cast<size_t>(p) * n;
      double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      for (int j = 0; j < n; ++j) {
        double bj = br[j];
        c0[j] += x0 * bj;
        c1[j] += x1 * bj;
        c2[j] += x2 * bj;
        c3[j] += x3 * bj;
      }
    }
  }
  for (; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * k;
    double* cr = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double* br = b + static_cast<size_t>(p) * n;
      double x = ar[p];
      for (int j = 0; j < n; ++j) cr[j] += x * br[j];
    }
  }
}

void gemm_at_b_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  // C[k,n] += sum_i a[i,:]^T b[i,:]
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double *a0 = a + static_cast<size_t>(i) * k, *a1 = a0 + k, *a2 = a1 + k, *a3 = a2 + k;
    const double *b0 = b + static_cast<size_t>(i) * n, *b1 = b0 + n, *b2 = b1 + n, *b3 = b2 + n;
    for (int p = 0; p < k; ++p) {
      double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      double* cr = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) cr[j] += x0 * b0[j] + x1 * b1[j] + x2 * b2[j] + x3 * b3[j];
    }
  }
  for (; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * k;
    const double* br = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double x = ar[p];
      double* cr = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) cr[j] += x * br[j];
    }
  }
}

void gemm_a_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  // C[m,k] += A[m,n] B[k,n]^T ; dot products over n
  for (int i = 0; i < m; ++i) {
    const double* ar = a + static_cast<size_t>(i) * n;
    double* cr = c + static_cast<size_t>(i) * k;
    int p = 0;
    for (; p + 4 <= k; p += 4) {
      const double *b0 = b + static_cast<size_t>(p) * n, *b1 = b0 + n, *b2 = b1 + n, *b3 = b2 + n;
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (int j = 0; j < n; ++j) {
        double aj = ar[j];
        s0 += aj * b0[j];
        s1 += aj * b1[j];
        s2 += aj * b2[j];
        s3 += aj * b3[j];
      }
      cr[p] += s0;
      cr[p + 1] += s1;
      cr[p + 2] += s2;
      cr[p + 3] += s3;
    }
    for (; p < k; ++p) {
      const double* br = b + static_cast<size_t>(p) * n;
      double s = 0;
      for (int j = 0; j < n; ++j) s += ar[j] * br[j];
      cr[p] += s;
    }
  }
}

// ----------------------------------------------------------------- ops ----

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> v(a.size());
  const auto &av = a.value(), &bv = b.value();
  for (long i = 0; i < a.size(); ++i) v[i] = av[i] + bv[i];
  auto out = make_node(a.shape(), std::move(v));
  return finish_op(out, {a, b}, [](TensorNode& self) {
    for (int s = 0; s < 2; ++s) {
      TensorNode& p = *self.parents[s];
      if (!p.requires_grad) continue;
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 1 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("add_rowvec: need [m,n] + [n], got " + shape_str(a.shape()) + " + " +
                                shape_str(b.shape()));
  int m = a.dim(0), n = a.dim(1);
  std::vector<double> v(a.value());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) v[static_cast<size_t>(i) * n + j] += b.value()[j];
  auto out = make_node(a.shape(), std::move(v));
  return finish_op(out, {a, b}, [m, n](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) pb.grad[j] += self.grad[static_cast<size_t>(i) * n + j];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> v(a.size());
  const auto &av = a.value(), &bv = b.value();
  for (long i = 0; i < a.size(); ++i) v[i] = av[i] - bv[i];
  auto out = make_node(a.shape(), std::move(v));
  return finish_op(out, {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> v(a.size());
  const auto &av = a.value(), &bv = b.value();
  for (long i = 0; i < a.size(); ++i) v[i] = av[i] * bv[i];
  auto out = make_node(a.shape(), std::move(v));
  return finish_op(out, {a, b}, [](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    if (pb.requires_grad)
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> v(a.size());
  const auto& av = a.value();
  for (long i = 0; i < a.size(); ++i) v[i] = av[i] * c;
  auto out = make_node(a.shape(), std::move(v));
  return finish_op(out, {a}, [c](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> v(static_cast<size_t>(m) * n, 0.0);
  gemm_acc(a.value().data(), b.value().data(), v.data(), m, k, n);
  auto out = make_node({m, n}, std::move(v));
  return finish_op(out, {a, b}, [m, k, n](TensorNode& self) {
    TensorNode& pa = *self.parents[0];
    TensorNode& pb = *self.parents[1];
    if (pa.requires_grad) gemm_a_bt_acc(self.grad.data(), pb.value.data(), pa.grad.data(), m, k, n);
    if (pb.requires_grad) gemm_at_b_acc(pa.value.data(), self.grad.data(), pb.grad.data(), m, k, n);
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> v(x.size());
  const auto& xv = x.value();
  for (long i = 0; i < x.size(); ++i) v[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  auto out = make_node(x.shape(), std::move(v));
  return finish_op(out, {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
  });
}

Tensor tanh_op(const Tensor& x) {
  std::vector<double> v(x.size());
  const auto& xv = x.value();
  for (long i = 0; i < x.size(); ++i) v[i] = std::tanh(xv[i]);
  auto out = make_node(x.shape(), std::move(v));
  return finish_op(out, {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.value[i];
      p.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

namespace {

// iterates all (outer, inner) slices for a reduction along `axis`
struct AxisIter {
  long outer, len, inner;
  AxisIter(const std::vector<int>& shape, int axis) {
    outer = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[i];
    len = shape[axis];
    inner = 1;
    for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  }
  long index(long o, long l, long in) const { return (o * len + l) * inner + in; }
};

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.ndim())
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for " +
                                shape_str(x.shape()));
  AxisIter it(x.shape(), axis);
  std::vector<double> v(x.size());
  const auto& xv = x.value();
  for (long o = 0; o < it.outer; ++o)
    for (long in = 0; in < it.inner; ++in) {
      double mx = -1e300;
      for (long l = 0; l < it.len; ++l) mx = std::max(mx, xv[it.index(o, l, in)]);
      double z = 0.0;
      for (long l = 0; l < it.len; ++l) {
        double e = std::exp(xv[it.index(o, l, in)] - mx);
        v[it.index(o, l, in)] = e;
        z += e;
      }
      for (long l = 0; l < it.len; ++l) v[it.index(o, l, in)] /= z;
    }
  auto out = make_node(x.shape(), std::move(v));
  return finish_op(out, {x}, [it](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (long o = 0; o < it.outer; ++o)
      for (long in = 0; in < it.inner; ++in) {
        double dot = 0.0;
        for (long l = 0; l < it.len; ++l) {
          long i = it.index(o, l, in);
          dot += self.grad[i] * self.value[i];
        }
        for (long l = 0; l < it.len; ++l) {
          long i = it.index(o, l, in);
          p.grad[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  auto out = make_node({1}, {s});
  return finish_op(out, {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    double g = self.grad[0];
    for (auto& pg : p.grad) pg += g;
  });
}

Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  long n = x.size();
  auto out = make_node({1}, {s / static_cast<double>(n)});
  return finish_op(out, {x}, [n](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    double g = self.grad[0] / static_cast<double>(n);
    for (auto& pg : p.grad) pg += g;
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  int m = parts[0].dim(0);
  int n = 0;
  for (const auto& t : parts) {
    if (t.ndim() != 2 || t.dim(0) != m)
      throw std::invalid_argument("concat_cols: row mismatch at " + shape_str(t.shape()));
    n += t.dim(1);
  }
  std::vector<double> v(static_cast<size_t>(m) * n);
  std::vector<int> widths;
  widths.reserve(parts.size());
  int off = 0;
  for (const auto& t : parts) {
    int w = t.dim(1);
    widths.push_back(w);
    for (int i = 0; i < m; ++i)
      std::memcpy(&v[static_cast<size_t>(i) * n + off], &t.value()[static_cast<size_t>(i) * w],
                  sizeof(double) * w);
    off += w;
  }
  auto out = make_node({m, n}, std::move(v));
  return finish_op(out, parts, [m, n, widths](TensorNode& self) {
    int off2 = 0;
    for (size_t s = 0; s < self.parents.size(); ++s) {
      TensorNode& p = *self.parents[s];
      int w = widths[s];
      if (p.requires_grad)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j)
            p.grad[static_cast<size_t>(i) * w + j] += self.grad[static_cast<size_t>(i) * n + off2 + j];
      off2 += w;
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  if (shape_size(new_shape) != x.size())
    throw std::invalid_argument("reshape: size mismatch " + shape_str(x.shape()) + " -> " +
                                shape_str(new_shape));
  auto out = make_node(std::move(new_shape), x.value());
  return finish_op(out, {x}, [](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.ndim() != 2) throw std::invalid_argument("cross_entropy: probs must be [batch, classes]");
  int m = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != m)
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                                std::to_string(m));
  for (int i = 0; i < m; ++i)
    if (labels[i] < 0 || labels[i] >= c)
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[i]) + " outside [0," +
                              std::to_string(c - 1) + "]");
  constexpr double kClamp = 1e-12;
  double s = 0.0;
  const auto& pv = probs.value();
  for (int i = 0; i < m; ++i) {
    double p = pv[static_cast<size_t>(i) * c + labels[i]];
    s -= std::log(p > kClamp ? p : kClamp);
  }
  auto out = make_node({1}, {s / m});
  return finish_op(out, {probs}, [m, c, labels](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    double g = self.grad[0] / m;
    for (int i = 0; i < m; ++i) {
      size_t idx = static_cast<size_t>(i) * c + labels[i];
      if (p.value[idx] > kClamp) p.grad[idx] -= g / p.value[idx];
    }
  });
}

// ---------------------------------------------------------------- conv ----

namespace {

// column matrix for 3x3/pad-1 conv: [(n*h*w) x (ci*9)]
void im2col_3x3(const double* x, int n, int ci, int h, int w, double* cols) {
  const int k2 = 9;
  const long row_len = static_cast<long>(ci) * k2;
  for (int img = 0; img < n; ++img) {
    const double* xi = x + static_cast<size_t>(img) * ci * h * w;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox) {
        double* row = cols + ((static_cast<long>(img) * h + oy) * w + ox) * row_len;
        for (int ch = 0; ch < ci; ++ch) {
          const double* xc = xi + static_cast<size_t>(ch) * h * w;
          double* r = row + static_cast<size_t>(ch) * k2;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) {
              r[ky * 3 + 0] = r[ky * 3 + 1] = r[ky * 3 + 2] = 0.0;
              continue;
            }
            for (int kx = 0; kx < 3; ++kx) {
              int ix = ox + kx - 1;
              r[ky * 3 + kx] = (ix < 0 || ix >= w) ? 0.0 : xc[static_cast<size_t>(iy) * w + ix];
            }
          }
        }
      }
  }
}

// scatter-add of column-matrix gradients back to image layout
void col2im_3x3_acc(const double* cols, int n, int ci, int h, int w, double* dx) {
  const int k2 = 9;
  const long row_len = static_cast<long>(ci) * k2;
  for (int img = 0; img < n; ++img) {
    double* xi = dx + static_cast<size_t>(img) * ci * h * w;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox) {
        const double* row = cols + ((static_cast<long>(img) * h + oy) * w + ox) * row_len;
        for (int ch = 0; ch < ci; ++ch) {
          double* xc = xi + static_cast<size_t>(ch) * h * w;
          const double* r = row + static_cast<size_t>(ch) * k2;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int ix = ox + kx - 1;
              if (ix >= 0 && ix < w) xc[static_cast<size_t>(iy) * w + ix] += r[ky * 3 + kx];
            }
          }
        }
      }
  }
}

}  // namespace

Tensor conv2d_3x3(const Tensor& x, const Tensor& wt) {
  if (x.ndim() != 4 || wt.ndim() != 4 || wt.dim(2) != 3 || wt.dim(3) != 3 || wt.dim(1) != x.dim(1))
    throw std::invalid_argument("conv2d_3x3: bad shapes x=" + shape_str(x.shape()) +
                                " w=" + shape_str(wt.shape()));
  int n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3), co = wt.dim(0);
  long rows = static_cast<long>(n) * h * w;
  long rlen = static_cast<long>(ci) * 9;
  std::vector<double> cols(rows * rlen);
  im2col_3x3(x.value().data(), n, ci, h, w, cols.data());
  // out_mat[(n*h*w) x co] = cols x W^T
  std::vector<double> out_mat(rows * co, 0.0);
  gemm_a_bt_acc(cols.data(), wt.value().data(), out_mat.data(), static_cast<int>(rows),
                co, static_cast<int>(rlen));
  // rearrange to NCHW
  std::vector<double> v(static_cast<size_t>(n) * co * h * w);
  for (int img = 0; img < n; ++img)
    for (int oc = 0; oc < co; ++oc)
      for (int p = 0; p < h * w; ++p)
        v[(static_cast<size_t>(img) * co + oc) * h * w + p] =
            out_mat[(static_cast<size_t>(img) * h * w + p) * co + oc];
  auto out = make_node({n, co, h, w}, std::move(v));
  return finish_op(out, {x, wt}, [n, ci, h, w, co](TensorNode& self) {
    TensorNode& px = *self.parents[0];
    TensorNode& pw = *self.parents[1];
    long rows = static_cast<long>(n) * h * w;
    long rlen = static_cast<long>(ci) * 9;
    // gradient back to matrix layout
    std::vector<double> gmat(rows * co);
    for (int img = 0; img < n; ++img)
      for (int oc = 0; oc < co; ++oc)
        for (int p = 0; p < h * w; ++p)
          gmat[(static_cast<size_t>(img) * h * w + p) * co + oc] =
              self.grad[(static_cast<size_t>(img) * co + oc) * h * w + p];
    if (pw.requires_grad) {
      // dW[co x rlen] += gmat^T x cols ; cols recomputed from the saved input
      std::vector<double> cols(rows * rlen);
      im2col_3x3(px.value.data(), n, ci, h, w, cols.data());
      gemm_at_b_acc(gmat.data(), cols.data(), pw.grad.data(), static_cast<int>(rows), co,
                    static_cast<int>(rlen));
    }
    if (px.requires_grad) {
      // dcols[rows x rlen] = gmat x W
      std::vector<double> dcols(rows * rlen, 0.0);
      gemm_acc(gmat.data(), pw.value.data(), dcols.data(), static_cast<int>(rows), co,
               static_cast<int>(rlen));
      col2im_3x3_acc(dcols.data(), n, ci, h, w, px.grad.data());
    }
  });
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    std::vector<double>& running_mean, std::vector<double>& running_var,
                    bool training, double momentum, double eps) {
  if (x.ndim() != 4) throw std::invalid_argument("batch_norm2d: x must be NCHW");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.size() != c || beta.size() != c || static_cast<int>(running_mean.size()) != c ||
      static_cast<int>(running_var.size()) != c)
    throw std::invalid_argument("batch_norm2d: per-channel parameter size mismatch");
  long per_ch = static_cast<long>(n) * h * w;
  const auto& xv = x.value();
  std::vector<double> mu(c), var(c);
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int img = 0; img < n; ++img) {
        const double* p = &xv[(static_cast<size_t>(img) * c + ch) * h * w];
        for (int i = 0; i < h * w; ++i) s += p[i];
      }
      mu[ch] = s / per_ch;
      double sv = 0.0;
      for (int img = 0; img < n; ++img) {
        const double* p = &xv[(static_cast<size_t>(img) * c + ch) * h * w];
        for (int i = 0; i < h * w; ++i) {
          double d = p[i] - mu[ch];
          sv += d * d;
        }
      }
      var[ch] = sv / per_ch;  // biased, used for normalization
      double unbiased = per_ch > 1 ? sv / (per_ch - 1) : sv;
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mu[ch];
      running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mu[ch] = running_mean[ch];
      var[ch] = running_var[ch];
    }
  }
  std::vector<double> v(x.size());
  std::vector<double> inv_std(c);
  for (int ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);
  for (int img = 0; img < n; ++img)
    for (int ch = 0; ch < c; ++ch) {
      const double* p = &xv[(static_cast<size_t>(img) * c + ch) * h * w];
      double* q = &v[(static_cast<size_t>(img) * c + ch) * h * w];
      double g = gamma.value()[ch], b = beta.value()[ch];
      for (int i = 0; i < h * w; ++i) q[i] = g * (p[i] - mu[ch]) * inv_std[ch] + b;
    }
  auto out = make_node(x.shape(), std::move(v));
  return finish_op(out, {x, gamma, beta},
                   [n, c, h, w, mu, inv_std, training, per_ch](TensorNode& self) {
    TensorNode& px = *self.parents[0];
    TensorNode& pg = *self.parents[1];
    TensorNode& pb = *self.parents[2];
    for (int ch = 0; ch < c; ++ch) {
      double g = pg.value[ch];
      // per-channel reductions over x_hat and grad
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int img = 0; img < n; ++img) {
        const double* xp = &px.value[(static_cast<size_t>(img) * c + ch) * h * w];
        const double* dy = &self.grad[(static_cast<size_t>(img) * c + ch) * h * w];
        for (int i = 0; i < h * w; ++i) {
          double xhat = (xp[i] - mu[ch]) * inv_std[ch];
          sum_dy += dy[i];
          sum_dy_xhat += dy[i] * xhat;
        }
      }
      if (pg.requires_grad) pg.grad[ch] += sum_dy_xhat;
      if (pb.requires_grad) pb.grad[ch] += sum_dy;
      if (px.requires_grad) {
        for (int img = 0; img < n; ++img) {
          const double* xp = &px.value[(static_cast<size_t>(img) * c + ch) * h * w];
          const double* dy = &self.grad[(static_cast<size_t>(img) * c + ch) * h * w];
          double* dx = &px.grad[(static_cast<size_t>(img) * c + ch) * h * w];
          for (int i = 0; i < h * w; ++i) {
            if (training) {
              double xhat = (xp[i] - mu[ch]) * inv_std[ch];
              dx[i] += g * inv_std[ch] *
                       (dy[i] - sum_dy / per_ch - xhat * sum_dy_xhat / per_ch);
            } else {
              dx[i] += g * inv_std[ch] * dy[i];
            }
          }
        }
      }
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 4) throw std::invalid_argument("global_avg_pool: x must be NCHW");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  long hw = static_cast<long>(h) * w;
  std::vector<double> v(static_cast<size_t>(n) * c);
  const auto& xv = x.value();
  for (int img = 0; img < n; ++img)
    for (int ch = 0; ch < c; ++ch) {
      const double* p = &xv[(static_cast<size_t>(img) * c + ch) * hw];
      double s = 0.0;
      for (long i = 0; i < hw; ++i) s += p[i];
      v[static_cast<size_t>(img) * c + ch] = s / hw;
    }
  auto out = make_node({n, c}, std::move(v));
  return finish_op(out, {x}, [n, c, hw](TensorNode& self) {
    TensorNode& p = *self.parents[0];
    for (int img = 0; img < n; ++img)
      for (int ch = 0; ch < c; ++ch) {
        double g = self.grad[static_cast<size_t>(img) * c + ch] / hw;
        double* dx = &p.grad[(static_cast<size_t>(img) * c + ch) * hw];
        for (long i = 0; i < hw; ++i) dx[i] += g;
      }
  });
}

}  // namespace poisonlink
