#pragma once

#include <complex>
#include <vector>

namespace poisonlink {

using cxd = std::complex<double>;

// One received baseband vector, length n_rx.
using ReceivedSymbol = std::vector<cxd>;

inline constexpr int kQpskOrder = 4;

// Gray-ordered QPSK: 0 -> (+1+i)/sqrt(2), 1 -> (+1-i)/sqrt(2),
// 2 -> (-1+i)/sqrt(2), 3 -> (-1-i)/sqrt(2). Unit power per point.
cxd qpsk_point(int label);

// Per-user labels -> transmitted vector, one constellation point per antenna.
std::vector<cxd> modulate(const std::vector<int>& per_user);

// Nearest-point demapping of a single stream value.
int demodulate_hard(cxd v);

// Positional encoding between per-user labels and the joint class index:
// joint = sum_u per_user[u] * 4^u.
int joint_of(const std::vector<int>& per_user);
std::vector<int> users_of(int joint, int n_tx);
long joint_class_count(int n_tx);

// [Re(y); Im(y)] as one real vector of length 2*n_rx.
std::vector<double> real_features(const ReceivedSymbol& y);
ReceivedSymbol features_to_symbol(const std::vector<double>& f);

}  // namespace poisonlink
