#pragma once

#include <string>
#include <vector>

#include "poisonlink/block.hpp"
#include "poisonlink/modem.hpp"
#include "poisonlink/rng.hpp"

namespace poisonlink {

enum class ChannelKind { LinearTimeVarying, NonlinearTimeVarying, LinearStatic, TapFile };

std::string channel_kind_name(ChannelKind k);
ChannelKind channel_kind_from_name(const std::string& name);

struct ChannelConfig {
  ChannelKind kind = ChannelKind::LinearTimeVarying;
  double snr_db = 14.0;
  double tanh_gain = 0.5;  // k in y = tanh(k(Hx+w))
  std::string tap_file;    // required for TapFile
  uint64_t seed = 0;       // drives the fixed phases of the synthetic tap law
  int n_tx = 4;
  int n_rx = 4;

  void validate() const;
  // sigma^2 is the total variance of each complex entry; constellation power
  // is 1, so snr_db maps to 10^(-snr_db/10).
  double sigma2() const;
  bool nonlinear() const { return kind == ChannelKind::NonlinearTimeVarying; }
};

// Per-block tap table ingested from CSV (COST-2100-style traces).
struct TapTable {
  int n_rx = 0, n_tx = 0;
  // rows[b] holds n_rx*n_tx*2 reals, re/im interleaved, row-major over (i,j)
  std::vector<std::vector<double>> rows;
  int blocks() const { return static_cast<int>(rows.size()); }
};

TapTable load_tap_file(const std::string& path);
void save_tap_file(const TapTable& table, const std::string& path);

// Slowly drifting tap trace bundled as the COST 2100 stand-in: flat between
// adjacent blocks, larger excursions over tens of blocks.
TapTable make_cost2100_table(int blocks, int n_rx, int n_tx, uint64_t seed);

// Evaluates the configured tap law; synthetic phases are derived from
// config.seed at construction, so equal configs give equal realizations.
class ChannelModel {
 public:
  explicit ChannelModel(ChannelConfig cfg);

  ChannelRealization taps_at(int b) const;
  const ChannelConfig& config() const { return cfg_; }

 private:
  ChannelConfig cfg_;
  std::vector<double> phase_amp_, phase_rot_;  // phi, psi per (i,j)
  TapTable table_;
};

// y = Hx + w, or tanh applied to real and imaginary parts of k(Hx+w) for the
// nonlinear kind. w has i.i.d. complex Gaussian entries of total variance
// sigma^2 (sigma^2/2 per real component).
ReceivedSymbol transmit(const std::vector<cxd>& x, const ChannelRealization& real,
                        const ChannelConfig& cfg, Rng& rng);

// Draws uniform labels, modulates and transmits every symbol of one block
// through the same realization. Pilot symbols are generated first.
TransmissionBlock generate_block(const ChannelModel& model, int b, int l_pilot, int l_info, Rng& rng);

}  // namespace poisonlink
