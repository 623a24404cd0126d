#pragma once

#include "poisonlink/detector.hpp"

namespace poisonlink {

// Deep soft interference cancellation: 3 unfolded SIC iterations, one small
// two-layer subnet per (iteration, user). Subnet input is the received
// feature vector concatenated with the other users' soft estimates from the
// previous iteration; iteration-0 estimates are uniform.
class DeepSic : public Detector {
 public:
  static constexpr int kIterations = 3;
  static constexpr int kHidden = 64;

  DeepSic(const SystemDims& dims, Rng& rng);

  std::string kind() const override { return "DeepSIC"; }
  const SystemDims& dims() const override { return dims_; }
  std::vector<Tensor> parameters() override;
  Tensor forward_raw(const Tensor& features) override;
  Tensor loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) override;
  bool joint_head() const override { return false; }
  void visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                            std::vector<double>&)>& fn) override;

  int subnet_input_dim() const { return dims_.feature_dim() + 4 * (dims_.n_tx - 1); }

  // Uniform 1/4 priors for one batch, one tensor per user.
  std::vector<Tensor> uniform_priors(int batch) const;

  // One SIC stage: soft estimates for every user at iteration q from the
  // previous iteration's estimates.
  std::vector<Tensor> sic_iteration(const Tensor& features, const std::vector<Tensor>& priors, int q);

  // All iterations' outputs, outer index q in 0..2.
  std::vector<std::vector<Tensor>> forward_all(const Tensor& features);

 private:
  struct Subnet {
    Tensor w1, b1, w2, b2;
  };
  Subnet& net(int q, int u) { return subnets_[static_cast<size_t>(q) * dims_.n_tx + u]; }

  SystemDims dims_;
  std::vector<Subnet> subnets_;
};

}  // namespace poisonlink
