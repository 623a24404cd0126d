#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poisonlink/modem.hpp"
#include "poisonlink/rng.hpp"
#include "poisonlink/tensor.hpp"

namespace poisonlink {

struct SystemDims {
  int n_tx = 4;
  int n_rx = 4;

  int feature_dim() const { return 2 * n_rx; }
  long joint_classes() const {
    long n = 1;
    for (int u = 0; u < n_tx; ++u) n *= 4;
    return n;
  }
};

// Named state array (parameter values or running statistics).
struct StateEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};
using ParameterBlob = std::vector<StateEntry>;

// Uniform contract over the three detector architectures: forward to per-user
// class probabilities, training loss, parameter access, snapshot/restore.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string kind() const = 0;
  virtual const SystemDims& dims() const = 0;

  // Trainable tensors in a stable order; handles share storage with the net.
  virtual std::vector<Tensor> parameters() = 0;

  // Probability output of the architecture head on [batch, 2*n_rx] features:
  // [batch, n_tx*4] final-iteration per-user probabilities for DeepSIC,
  // [batch, 4^n_tx] joint probabilities otherwise. Builds a graph when grads
  // are enabled.
  virtual Tensor forward_raw(const Tensor& features) = 0;

  // Eq.-style training loss: per-user cross-entropy summed over all subnets
  // for DeepSIC, joint-label cross-entropy for the black-box heads.
  virtual Tensor loss_on(const Tensor& features, const std::vector<std::vector<int>>& labels) = 0;

  virtual bool joint_head() const = 0;
  virtual void set_train_mode(bool) {}

  // Enumerates every state array (parameters, then buffers), fixed order.
  virtual void visit_state(const std::function<void(const std::string&, const std::vector<int>&,
                                                    std::vector<double>&)>& fn) = 0;

  // [batch, n_tx, 4] probability array (marginals for joint heads); inference
  // mode, no graph.
  Tensor predict(const Tensor& features);

  // Hard decisions; ties break toward the lowest class index. Joint heads
  // decode the argmax joint class, DeepSIC the per-user argmax.
  std::vector<std::vector<int>> decode(const Tensor& features);

  ParameterBlob snapshot();
  void restore(const ParameterBlob& blob);

  long parameter_count();
};

std::unique_ptr<Detector> make_detector(const std::string& kind, const SystemDims& dims, Rng& rng);

// Versioned little-endian binary round-trip for snapshots. The architecture
// kind is recorded and checked on load.
void save_blob(const ParameterBlob& blob, const std::string& detector_kind, const std::string& path);
ParameterBlob load_blob(const std::string& expected_kind, const std::string& path);

// Batched [L, 2*n_rx] feature matrix from received symbols.
Tensor feature_matrix(const std::vector<ReceivedSymbol>& symbols);

// weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero
Tensor init_weight(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace poisonlink
