#pragma once

#include <vector>

#include "poisonlink/tensor.hpp"

namespace poisonlink {

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list. Moment buffers match
// parameter shapes; step_count advances by exactly one per step().
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  // One update from the gradients currently stored on the parameters.
  // Throws NumericError on NaN/Inf gradients.
  void step();
  void zero_grad();

  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Plain SGD step used by the meta-learning inner loop: p -= lr * grad.
void sgd_step(std::vector<Tensor>& params, double lr);

}  // namespace poisonlink
