#include "poisonlink/modem.hpp"

#include <cmath>
#include <stdexcept>

namespace poisonlink {

namespace {
const double kAmp = 1.0 / std::sqrt(2.0);
}

cxd qpsk_point(int label) {
  if (label < 0 || label >= kQpskOrder)
    throw std::out_of_range("qpsk_point: label " + std::to_string(label));
  double re = (label & 2) ? -kAmp : kAmp;
  double im = (label & 1) ? -kAmp : kAmp;
  return {re, im};
}

std::vector<cxd> modulate(const std::vector<int>& per_user) {
  std::vector<cxd> x;
  x.reserve(per_user.size());
  for (int s : per_user) x.push_back(qpsk_point(s));
  return x;
}

int demodulate_hard(cxd v) {
  int label = 0;
  if (v.real() < 0.0) label |= 2;
  if (v.imag() < 0.0) label |= 1;
  return label;
}

int joint_of(const std::vector<int>& per_user) {
  int joint = 0, w = 1;
  for (int s : per_user) {
    if (s < 0 || s >= kQpskOrder) throw std::out_of_range("joint_of: class " + std::to_string(s));
    joint += s * w;
    w *= kQpskOrder;
  }
  return joint;
}

std::vector<int> users_of(int joint, int n_tx) {
  if (joint < 0 || joint >= joint_class_count(n_tx))
    throw std::out_of_range("users_of: joint index " + std::to_string(joint));
  std::vector<int> per_user(n_tx);
  for (int u = 0; u < n_tx; ++u) {
    per_user[u] = joint % kQpskOrder;
    joint /= kQpskOrder;
  }
  return per_user;
}

long joint_class_count(int n_tx) {
  long n = 1;
  for (int u = 0; u < n_tx; ++u) n *= kQpskOrder;
  return n;
}

std::vector<double> real_features(const ReceivedSymbol& y) {
  std::vector<double> f(2 * y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    f[i] = y[i].real();
    f[y.size() + i] = y[i].imag();
  }
  return f;
}

ReceivedSymbol features_to_symbol(const std::vector<double>& f) {
  if (f.size() % 2 != 0) throw std::invalid_argument("features_to_symbol: odd feature length");
  size_t n = f.size() / 2;
  ReceivedSymbol y(n);
  for (size_t i = 0; i < n; ++i) y[i] = {f[i], f[n + i]};
  return y;
}

}  // namespace poisonlink
