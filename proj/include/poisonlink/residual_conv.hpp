#pragma once

#include "poisonlink/detector.hpp"

namespace poisonlink {

// Residual convolutional detector: features reshaped to a 1-channel image of
// height 2 (real/imag rows) and width n_rx, a bias-free 3x3 stem to 32
// channels, 10 residual blocks (two bias-free 3x3 convs with batch norm,
// ReLU between, identity skip), global average pooling and a joint softmax
// head.
class ResidualConv : public Detector {
 public:
  static constexpr int kBlocks = 10;
  static constexpr int kChannels = 32;

  ResidualConv(const SystemDims& dims, Rng& rng);

  std::string kind() const override { return "ResidualConv"; }
  const SystemDims& dims() const override { return dims_; }
  std::vector<Tensor> parameters() override;
  Tensor forward_raw(const Tensor& features) override;
  Tensor loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) override;
  bool joint_head() const override { return true; }
  void set_train_mode(bool on) override { training_ = on; }
  void visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                            std::vector<double>&)>& fn) override;

  // test hook: feature maps after the residual stack, [batch, 32, 2, n_rx]
  Tensor feature_stack(const Tensor& features);

  struct BatchNorm {
    Tensor gamma, beta;
    std::vector<double> running_mean, running_var;
  };
  struct Block {
    Tensor conv1, conv2;
    BatchNorm bn1, bn2;
  };

  Block& block(int i) { return blocks_[i]; }

 private:
  Tensor apply_bn(const Tensor& x, BatchNorm& bn);

  SystemDims dims_;
  bool training_ = true;
  Tensor stem_;
  std::vector<Block> blocks_;
  Tensor head_w_, head_b_;
};

}  // namespace poisonlink
