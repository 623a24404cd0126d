#include "poisonlink/residual_conv.hpp"

#include <stdexcept>

namespace poisonlink {

ResidualConv::ResidualConv(const SystemDims& dims, Rng& rng) : dims_(dims) {
  stem_ = init_weight({kChannels, 1, 3, 3}, 9, rng);
  blocks_.resize(kBlocks);
  int fan = kChannels * 9;
  for (auto& blk : blocks_) {
    blk.conv1 = init_weight({kChannels, kChannels, 3, 3}, fan, rng);
    blk.conv2 = init_weight({kChannels, kChannels, 3, 3}, fan, rng);
    for (BatchNorm* bn : {&blk.bn1, &blk.bn2}) {
      bn->gamma = Tensor::full({kChannels}, 1.0);
      bn->beta = Tensor::zeros({kChannels});
      bn->gamma.set_requires_grad(true);
      bn->beta.set_requires_grad(true);
      bn->running_mean.assign(kChannels, 0.0);
      bn->running_var.assign(kChannels, 1.0);
    }
  }
  head_w_ = init_weight({kChannels, static_cast<int>(dims_.joint_classes())}, kChannels, rng);
  head_b_ = Tensor::zeros({static_cast<int>(dims_.joint_classes())});
  head_b_.set_requires_grad(true);
}

std::vector<Tensor> ResidualConv::parameters() {
  std::vector<Tensor> ps;
  ps.push_back(stem_);
  for (auto& blk : blocks_) {
    ps.push_back(blk.conv1);
    ps.push_back(blk.bn1.gamma);
    ps.push_back(blk.bn1.beta);
    ps.push_back(blk.conv2);
    ps.push_back(blk.bn2.gamma);
    ps.push_back(blk.bn2.beta);
  }
  ps.push_back(head_w_);
  ps.push_back(head_b_);
  return ps;
}

Tensor ResidualConv::apply_bn(const Tensor& x, BatchNorm& bn) {
  return batch_norm2d(x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, training_);
}

Tensor ResidualConv::feature_stack(const Tensor& features) {
  int batch = features.dim(0);
  if (features.dim(1) != dims_.feature_dim())
    throw std::invalid_argument("ResidualConv: feature width " + std::to_string(features.dim(1)));
  // [Re row; Im row] image, 1 channel
  Tensor x = reshape(features, {batch, 1, 2, dims_.n_rx});
  x = conv2d_3x3(x, stem_);
  for (auto& blk : blocks_) {
    Tensor y = relu(apply_bn(conv2d_3x3(x, blk.conv1), blk.bn1));
    y = apply_bn(conv2d_3x3(y, blk.conv2), blk.bn2);
    x = relu(add(y, x));
  }
  return x;
}

Tensor ResidualConv::forward_raw(const Tensor& features) {
  Tensor pooled = global_avg_pool(feature_stack(features));
  return softmax(add_rowvec(matmul(pooled, head_w_), head_b_), 1);
}

Tensor ResidualConv::loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) {
  if (static_cast<int>(labels.size()) != features.dim(0))
    throw std::invalid_argument("loss_on: batch/label mismatch");
  std::vector<int> joint(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) joint[i] = joint_of(labels[i]);
  return cross_entropy(forward_raw(features), joint);
}

void ResidualConv::visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                                        std::vector<double>&)>& fn) {
  std::vector<int> chan_shape{kChannels};
  fn("stem.w", stem_.shape(), stem_.value_mut());
  for (int i = 0; i < kBlocks; ++i) {
    auto& blk = blocks_[i];
    std::string base = "block" + std::to_string(i) + ".";
    fn(base + "conv1.w", blk.conv1.shape(), blk.conv1.value_mut());
    fn(base + "bn1.gamma", blk.bn1.gamma.shape(), blk.bn1.gamma.value_mut());
    fn(base + "bn1.beta", blk.bn1.beta.shape(), blk.bn1.beta.value_mut());
    fn(base + "bn1.running_mean", chan_shape, blk.bn1.running_mean);
    fn(base + "bn1.running_var", chan_shape, blk.bn1.running_var);
    fn(base + "conv2.w", blk.conv2.shape(), blk.conv2.value_mut());
    fn(base + "bn2.gamma", blk.bn2.gamma.shape(), blk.bn2.gamma.value_mut());
    fn(base + "bn2.beta", blk.bn2.beta.shape(), blk.bn2.beta.value_mut());
    fn(base + "bn2.running_mean", chan_shape, blk.bn2.running_mean);
    fn(base + "bn2.running_var", chan_shape, blk.bn2.running_var);
  }
  fn("head.w", head_w_.shape(), head_w_.value_mut());
  fn("head.b", head_b_.shape(), head_b_.value_mut());
}

}  // namespace poisonlink
