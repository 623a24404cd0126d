#pragma once

#include <cstdint>
#include <vector>

#include "poisonlink/modem.hpp"

namespace poisonlink {

// Complex channel matrix for one block, stored as real/imag pairs
// (row-major, n_rx x n_tx), plus the per-entry complex noise variance.
struct ChannelRealization {
  int n_rx = 0, n_tx = 0;
  std::vector<double> h_re, h_im;
  double sigma2 = 0.0;
  int block_index = 0;

  cxd h(int i, int j) const { return {h_re[static_cast<size_t>(i) * n_tx + j], h_im[static_cast<size_t>(i) * n_tx + j]}; }
};

// One transmission block: pilot and info partitions are disjoint; all symbols
// of a block pass through the same channel realization.
struct TransmissionBlock {
  int block_index = 0;
  std::vector<ReceivedSymbol> pilot_rx;
  std::vector<std::vector<int>> pilot_labels;  // per symbol: n_tx class indices
  std::vector<ReceivedSymbol> info_rx;
  std::vector<std::vector<int>> info_labels;
  ChannelRealization realization;

  uint64_t fingerprint() const;
};

}  // namespace poisonlink
