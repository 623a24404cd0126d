#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "poisonlink/channel.hpp"
#include "poisonlink/detector.hpp"

namespace poisonlink {

struct OnlineConfig {
  int epochs = 300;
  double lr = 5e-3;
  double meta_lr = 0.01;
  int meta_window = 5;   // blocks of pilots kept for meta-learning
  int meta_epochs = 30;  // outer updates per refresh
  int inner_steps = 1;
  double support_frac = 0.5;

  void validate() const;
};

struct JointConfig {
  std::vector<double> snr_grid = {2, 4, 6, 8, 10, 12, 14, 16};
  int symbols_per_snr = 5000;  // L_sur
  int block_span = 100;        // block indices the collected data spans
  int epochs = 300;
  double lr = 5e-3;

  void validate() const;
};

// One block's training data: [L, 2*n_rx] features plus per-user labels.
struct PilotSet {
  Tensor features;
  std::vector<std::vector<int>> labels;

  int count() const { return static_cast<int>(labels.size()); }
};

PilotSet pilots_of(const TransmissionBlock& block);
PilotSet subset(const PilotSet& p, const std::vector<int>& rows);

// FIFO window over the most recent blocks' pilots.
class MetaBuffer {
 public:
  explicit MetaBuffer(int capacity = 5);
  void push(PilotSet p);
  bool empty() const { return window_.empty(); }
  int size() const { return static_cast<int>(window_.size()); }
  int capacity() const { return capacity_; }
  const PilotSet& at(int i) const { return window_.at(i); }

 private:
  int capacity_;
  std::deque<PilotSet> window_;
};

// `epochs` full-batch Adam epochs on the pilot set, continuing from the
// detector's current weights. Throws TrainingAborted on non-finite loss.
void online_adapt(Detector& d, const PilotSet& pilots, const OnlineConfig& cfg);

// First-order MAML over the buffered blocks, then online adaptation on the
// current block's pilots from the meta-weights. Empty buffer falls back to
// plain online adaptation.
void meta_adapt(Detector& d, const MetaBuffer& buffer, const PilotSet& current,
                const OnlineConfig& cfg, Rng& rng);

struct JointDataset {
  Tensor features;
  std::vector<std::vector<int>> labels;
};

// Clean pilot corpus spanning the SNR grid and block indices of the linear
// time-varying synthetic family (the attacker's collected data).
JointDataset build_joint_dataset(const ChannelConfig& system_channel, const JointConfig& cfg, Rng& rng);

// Offline joint learning of the surrogate over the collected corpus.
std::unique_ptr<Detector> joint_train(const SystemDims& dims, const ChannelConfig& system_channel,
                                      const JointConfig& cfg, Rng& rng);

}  // namespace poisonlink
