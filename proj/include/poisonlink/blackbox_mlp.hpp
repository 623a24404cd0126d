#pragma once

#include "poisonlink/detector.hpp"

namespace poisonlink {

// Fully-connected detector over the joint symbol alphabet: three hidden
// layers of width 60 with ReLU, then a softmax head of width 4^n_tx. Also the
// attacker's surrogate architecture.
class BlackBoxMlp : public Detector {
 public:
  static constexpr int kHidden = 60;

  BlackBoxMlp(const SystemDims& dims, Rng& rng);

  std::string kind() const override { return "BlackBoxMLP"; }
  const SystemDims& dims() const override { return dims_; }
  std::vector<Tensor> parameters() override;
  Tensor forward_raw(const Tensor& features) override;
  Tensor loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) override;
  bool joint_head() const override { return true; }
  void visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                            std::vector<double>&)>& fn) override;

 private:
  SystemDims dims_;
  Tensor w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_;
};

}  // namespace poisonlink
