#pragma once

#include <limits>
#include <string>
#include <vector>

#include "poisonlink/block.hpp"
#include "poisonlink/detector.hpp"

namespace poisonlink {

struct AttackConfig {
  double p_norm = 2.0;  // reported constraint norm, carried as metadata
  double eps = 0.3;     // per-feature perturbation box
  double step = 0.01;   // gamma
  int iters = 250;      // Q

  // PGD update base: true accumulates from the current iterate (standard
  // form); false restarts each step from the original symbol (the literal
  // one-shot reading of the update line).
  bool accumulate = true;

  // reading of ||y|| in the I_max = max{||y||} = -I_min rule
  enum class BoundRule { MaxAbsFeature, ComplexModulus };
  BoundRule bound_rule = BoundRule::MaxAbsFeature;

  // I_max; NaN means "derive from the pilot set being poisoned"
  double clip_abs = std::numeric_limits<double>::quiet_NaN();

  int period = 1;  // poison every `period`-th block

  void validate() const;
};

struct ClipBounds {
  double lo = 0.0, hi = 0.0;  // lo == -hi
};

ClipBounds compute_clip_bounds(const std::vector<ReceivedSymbol>& pilots,
                               AttackConfig::BoundRule rule = AttackConfig::BoundRule::MaxAbsFeature);

// Aligned clean/poisoned pilot features. Every perturbed feature lies within
// eps of its original and inside [I_min, I_max].
struct PoisonedPilotSet {
  int block_index = 0;
  std::vector<std::vector<double>> originals;  // real features per symbol
  std::vector<std::vector<double>> perturbed;
  std::vector<std::vector<int>> labels;        // untouched pilot labels
  std::vector<std::vector<double>> delta;      // perturbed - original
  std::vector<int> skipped;                    // symbols left clean (NaN gradients)
  std::vector<double> loss_trace;              // mean surrogate loss per PGD iterate
  ClipBounds bounds;

  int count() const { return static_cast<int>(originals.size()); }
  bool empty() const { return originals.empty(); }
};

// Non-targeted ascent PGD over the frozen surrogate (sign steps, per-feature
// eps box, I_min/I_max clamp). Labels stay clean.
PoisonedPilotSet pgd_poison(Detector& surrogate, const std::vector<ReceivedSymbol>& pilots,
                            const std::vector<std::vector<int>>& labels, const AttackConfig& cfg,
                            Rng& rng);

// Block with pilot received-symbols replaced by the perturbed ones; info
// partition and all labels bit-identical.
TransmissionBlock inject(const TransmissionBlock& block, const PoisonedPilotSet& poison);

// Single-step L2-normalized ascent direction, ||delta*||_2 = eps.
std::vector<double> l2_optimal_delta(Detector& model, const ReceivedSymbol& y,
                                     const std::vector<int>& s, double eps);

struct TransferDiagnostic {
  double dl_actual = 0.0;  // first-order loss increase on the target under the surrogate's delta*
  double dl_bound = 0.0;   // white-box bound eps * ||grad_target||_2
  double grad_cosine = 0.0;
};

TransferDiagnostic transfer_diagnostic(Detector& surrogate, Detector& target,
                                       const ReceivedSymbol& y, const std::vector<int>& s,
                                       double eps);

void export_poison_csv(const std::string& path, const std::vector<PoisonedPilotSet>& sets);

}  // namespace poisonlink
