#include "poisonlink/deepsic.hpp"

#include <stdexcept>

namespace poisonlink {

DeepSic::DeepSic(const SystemDims& dims, Rng& rng) : dims_(dims) {
  int in_dim = subnet_input_dim();
  subnets_.reserve(static_cast<size_t>(kIterations) * dims_.n_tx);
  for (int q = 0; q < kIterations; ++q)
    for (int u = 0; u < dims_.n_tx; ++u) {
      Subnet s;
      s.w1 = init_weight({in_dim, kHidden}, in_dim, rng);
      s.b1 = Tensor::zeros({kHidden});
      s.b1.set_requires_grad(true);
      s.w2 = init_weight({kHidden, 4}, kHidden, rng);
      s.b2 = Tensor::zeros({4});
      s.b2.set_requires_grad(true);
      subnets_.push_back(std::move(s));
    }
}

std::vector<Tensor> DeepSic::parameters() {
  std::vector<Tensor> ps;
  ps.reserve(subnets_.size() * 4);
  for (auto& s : subnets_) {
    ps.push_back(s.w1);
    ps.push_back(s.b1);
    ps.push_back(s.w2);
    ps.push_back(s.b2);
  }
  return ps;
}

std::vector<Tensor> DeepSic::uniform_priors(int batch) const {
  std::vector<Tensor> priors;
  priors.reserve(dims_.n_tx);
  for (int u = 0; u < dims_.n_tx; ++u) priors.push_back(Tensor::full({batch, 4}, 0.25));
  return priors;
}

std::vector<Tensor> DeepSic::sic_iteration(const Tensor& features, const std::vector<Tensor>& priors,
                                           int q) {
  if (q < 0 || q >= kIterations) throw std::out_of_range("sic_iteration: q=" + std::to_string(q));
  if (static_cast<int>(priors.size()) != dims_.n_tx)
    throw std::invalid_argument("sic_iteration: need one prior per user");
  std::vector<Tensor> next;
  next.reserve(dims_.n_tx);
  for (int u = 0; u < dims_.n_tx; ++u) {
    std::vector<Tensor> parts;
    parts.reserve(dims_.n_tx);
    parts.push_back(features);
    for (int v = 0; v < dims_.n_tx; ++v)
      if (v != u) parts.push_back(priors[v]);
    Tensor x = concat_cols(parts);
    Subnet& s = net(q, u);
    Tensor h = relu(add_rowvec(matmul(x, s.w1), s.b1));
    next.push_back(softmax(add_rowvec(matmul(h, s.w2), s.b2), 1));
  }
  return next;
}

std::vector<std::vector<Tensor>> DeepSic::forward_all(const Tensor& features) {
  std::vector<std::vector<Tensor>> outs;
  outs.reserve(kIterations);
  std::vector<Tensor> priors = uniform_priors(features.dim(0));
  for (int q = 0; q < kIterations; ++q) {
    priors = sic_iteration(features, priors, q);
    outs.push_back(priors);
  }
  return outs;
}

Tensor DeepSic::forward_raw(const Tensor& features) {
  auto outs = forward_all(features);
  return concat_cols(outs.back());  // [batch, n_tx*4], final iteration
}

Tensor DeepSic::loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) {
  if (static_cast<int>(labels.size()) != features.dim(0))
    throw std::invalid_argument("loss_on: batch/label mismatch");
  std::vector<std::vector<int>> per_user(dims_.n_tx, std::vector<int>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (static_cast<int>(labels[i].size()) != dims_.n_tx)
      throw std::invalid_argument("loss_on: label row has wrong user count");
    for (int u = 0; u < dims_.n_tx; ++u) per_user[u][i] = labels[i][u];
  }
  auto outs = forward_all(features);
  Tensor total = Tensor::scalar(0.0);
  for (auto& iteration : outs)
    for (int u = 0; u < dims_.n_tx; ++u)
      total = add(total, cross_entropy(iteration[u], per_user[u]));
  return total;
}

void DeepSic::visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                                   std::vector<double>&)>& fn) {
  for (int q = 0; q < kIterations; ++q)
    for (int u = 0; u < dims_.n_tx; ++u) {
      Subnet& s = net(q, u);
      std::string base = "sic.q" + std::to_string(q) + ".u" + std::to_string(u) + ".";
      fn(base + "w1", s.w1.shape(), s.w1.value_mut());
      fn(base + "b1", s.b1.shape(), s.b1.value_mut());
      fn(base + "w2", s.w2.shape(), s.w2.value_mut());
      fn(base + "b2", s.b2.shape(), s.b2.value_mut());
    }
}

}  // namespace poisonlink
