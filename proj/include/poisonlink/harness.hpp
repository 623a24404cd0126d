#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poisonlink/attack.hpp"
#include "poisonlink/channel.hpp"
#include "poisonlink/detector.hpp"
#include "poisonlink/training.hpp"

namespace poisonlink {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr const char* kResultsFormat = "poisonlink-results-v1";

// Receiver arm = architecture + adaptation regime. "MetaDeepSIC" is the
// DeepSIC architecture under online meta-learning; everything else adapts
// with plain online learning.
struct ReceiverSpec {
  std::string name;
  std::string arch;
  bool meta = false;
};
ReceiverSpec receiver_spec(const std::string& name);

struct RunConfig {
  std::vector<std::string> receivers = {"DeepSIC", "MetaDeepSIC", "BlackBoxMLP", "ResidualConv"};
  ChannelConfig channel;
  OnlineConfig training;
  JointConfig joint;
  AttackConfig attack;
  bool run_clean = true;
  bool run_poisoned = true;
  int blocks = 100;
  int reps = 5;
  int l_pilot = 200;
  int l_info = 50000;
  uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct ExperimentRecord {
  std::string receiver;
  std::string channel_kind;
  double snr_db = 0.0;
  bool poisoned = false;
  int rep = 0;  // -1 marks a repetition average
  std::vector<double> ser_block;
  std::vector<double> ser_cum;  // running mean of ser_block
  std::vector<double> per_user_final;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  bool aborted = false;
  std::string abort_reason;

  double final_cum_ser() const;
};

// Full experiment loop: per repetition and receiver, a fresh detector adapts
// block by block (optionally on poisoned pilots) and decodes the clean info
// symbols. Clean and poisoned arms replay identical channel/noise/label
// streams; the pilot perturbation is the only difference.
std::vector<ExperimentRecord> run_experiment(const RunConfig& cfg);

// Joint-symbol error rate: a symbol errs when any user's decision differs.
double ser(const std::vector<std::vector<int>>& decisions,
           const std::vector<std::vector<int>>& labels);
std::vector<double> ser_per_user(const std::vector<std::vector<int>>& decisions,
                                 const std::vector<std::vector<int>>& labels);

// 10*log10(poisoned/clean) on final cumulative SER.
double ser_degradation_db(double clean_ser, double poisoned_ser);
double ser_degradation_db(const ExperimentRecord& clean, const ExperimentRecord& poisoned);

// Element-wise mean over repetitions of one arm; rep becomes -1.
ExperimentRecord average_records(const std::vector<ExperimentRecord>& reps);

uint64_t config_hash(const RunConfig& cfg);
std::string config_json_string(const RunConfig& cfg);

// stem + "_results.csv" (series) and stem + "_meta.json" (config, seeds,
// versions). Lossless round-trip.
void persist(const std::vector<ExperimentRecord>& records, const RunConfig& cfg,
             const std::string& stem);
std::vector<ExperimentRecord> load_records(const std::string& stem);

}  // namespace poisonlink
