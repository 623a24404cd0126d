#include "poisonlink/blackbox_mlp.hpp"

#include <stdexcept>

namespace poisonlink {

BlackBoxMlp::BlackBoxMlp(const SystemDims& dims, Rng& rng) : dims_(dims) {
  int in = dims_.feature_dim();
  int out = static_cast<int>(dims_.joint_classes());
  w1_ = init_weight({in, kHidden}, in, rng);
  b1_ = Tensor::zeros({kHidden});
  w2_ = init_weight({kHidden, kHidden}, kHidden, rng);
  b2_ = Tensor::zeros({kHidden});
  w3_ = init_weight({kHidden, kHidden}, kHidden, rng);
  b3_ = Tensor::zeros({kHidden});
  w4_ = init_weight({kHidden, out}, kHidden, rng);
  b4_ = Tensor::zeros({out});
  for (Tensor* b : {&b1_, &b2_, &b3_, &b4_}) b->set_requires_grad(true);
}

std::vector<Tensor> BlackBoxMlp::parameters() {
  return {w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_};
}

Tensor BlackBoxMlp::forward_raw(const Tensor& features) {
  Tensor h = relu(add_rowvec(matmul(features, w1_), b1_));
  h = relu(add_rowvec(matmul(h, w2_), b2_));
  h = relu(add_rowvec(matmul(h, w3_), b3_));
  return softmax(add_rowvec(matmul(h, w4_), b4_), 1);
}

Tensor BlackBoxMlp::loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) {
  if (static_cast<int>(labels.size()) != features.dim(0))
    throw std::invalid_argument("loss_on: batch/label mismatch");
  std::vector<int> joint(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) joint[i] = joint_of(labels[i]);
  return cross_entropy(forward_raw(features), joint);
}

void BlackBoxMlp::visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                                       std::vector<double>&)>& fn) {
  const char* names[] = {"fc1.w", "fc1.b", "fc2.w", "fc2.b", "fc3.w", "fc3.b", "head.w", "head.b"};
  Tensor* ts[] = {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_, &w4_, &b4_};
  for (int i = 0; i < 8; ++i) fn(names[i], ts[i]->shape(), ts[i]->value_mut());
}

}  // namespace poisonlink
