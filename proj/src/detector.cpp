#include "poisonlink/detector.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "poisonlink/blackbox_mlp.hpp"
#include "poisonlink/deepsic.hpp"
#include "poisonlink/errors.hpp"
#include "poisonlink/residual_conv.hpp"

namespace poisonlink {

Tensor Detector::predict(const Tensor& features) {
  NoGradGuard ng;
  bool was_training = false;
  set_train_mode(false);
  Tensor raw = forward_raw(features);
  (void)was_training;
  int batch = raw.dim(0);
  int n_tx = dims().n_tx;
  Tensor out = Tensor::zeros({batch, n_tx, 4});
  auto& ov = out.value_mut();
  const auto& rv = raw.value();
  if (!joint_head()) {
    // raw already holds per-user 4-vectors side by side
    for (long i = 0; i < raw.size(); ++i) ov[i] = rv[i];
    return out;
  }
  long classes = dims().joint_classes();
  for (int b = 0; b < batch; ++b) {
    const double* row = &rv[static_cast<size_t>(b) * classes];
    double* orow = &ov[static_cast<size_t>(b) * n_tx * 4];
    for (long j = 0; j < classes; ++j) {
      long rest = j;
      for (int u = 0; u < n_tx; ++u) {
        orow[u * 4 + rest % 4] += row[j];
        rest /= 4;
      }
    }
  }
  return out;
}

std::vector<std::vector<int>> Detector::decode(const Tensor& features) {
  NoGradGuard ng;
  set_train_mode(false);
  Tensor raw = forward_raw(features);
  int batch = raw.dim(0);
  int n_tx = dims().n_tx;
  std::vector<std::vector<int>> decisions(batch);
  const auto& rv = raw.value();
  if (joint_head()) {
    long classes = dims().joint_classes();
    for (int b = 0; b < batch; ++b) {
      const double* row = &rv[static_cast<size_t>(b) * classes];
      long best = 0;
      for (long j = 1; j < classes; ++j)
        if (row[j] > row[best]) best = j;  // strict: ties keep the lowest index
      decisions[b] = users_of(static_cast<int>(best), n_tx);
    }
  } else {
    for (int b = 0; b < batch; ++b) {
      decisions[b].resize(n_tx);
      const double* row = &rv[static_cast<size_t>(b) * n_tx * 4];
      for (int u = 0; u < n_tx; ++u) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
          if (row[u * 4 + c] > row[u * 4 + best]) best = c;
        decisions[b][u] = best;
      }
    }
  }
  return decisions;
}

ParameterBlob Detector::snapshot() {
  ParameterBlob blob;
  visit_state([&](const std::string& name, const std::vector<int>& shape, std::vector<double>& data) {
    blob.push_back({name, shape, data});
  });
  return blob;
}

void Detector::restore(const ParameterBlob& blob) {
  size_t idx = 0;
  visit_state([&](const std::string& name, const std::vector<int>& shape, std::vector<double>& data) {
    if (idx >= blob.size()) throw CompatibilityError("restore: blob has too few entries");
    const StateEntry& e = blob[idx++];
    if (e.name != name || e.shape != shape)
      throw CompatibilityError("restore: expected '" + name + "' " + shape_str(shape) + ", blob has '" +
                               e.name + "' " + shape_str(e.shape));
    data = e.data;
  });
  if (idx != blob.size()) throw CompatibilityError("restore: blob has extra entries");
}

long Detector::parameter_count() {
  long n = 0;
  for (auto& p : parameters()) n += p.size();
  return n;
}

Tensor init_weight(std::vector<int> shape, int fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::uniform(std::move(shape), -bound, bound, rng);
  t.set_requires_grad(true);
  return t;
}

Tensor feature_matrix(const std::vector<ReceivedSymbol>& symbols) {
  if (symbols.empty()) throw std::invalid_argument("feature_matrix: no symbols");
  int n = static_cast<int>(symbols[0].size());
  std::vector<double> data;
  data.reserve(symbols.size() * 2 * n);
  for (const auto& y : symbols) {
    auto f = real_features(y);
    data.insert(data.end(), f.begin(), f.end());
  }
  return Tensor::from({static_cast<int>(symbols.size()), 2 * n}, std::move(data));
}

std::unique_ptr<Detector> make_detector(const std::string& kind, const SystemDims& dims, Rng& rng) {
  if (kind == "DeepSIC") return std::make_unique<DeepSic>(dims, rng);
  if (kind == "BlackBoxMLP") return std::make_unique<BlackBoxMlp>(dims, rng);
  if (kind == "ResidualConv") return std::make_unique<ResidualConv>(dims, rng);
  throw std::invalid_argument("unknown detector kind '" + kind + "'");
}

// ------------------------------------------------------------- blob IO ----

namespace {

constexpr char kMagic[4] = {'P', 'L', 'K', 'B'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_i64(std::ostream& out, int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw ParseError("blob: truncated u32");
  return v;
}
int64_t read_i64(std::istream& in) {
  int64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw ParseError("blob: truncated i64");
  return v;
}

}  // namespace

void save_blob(const ParameterBlob& blob, const std::string& detector_kind, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write blob '" + path + "'");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(detector_kind.size()));
  out.write(detector_kind.data(), static_cast<std::streamsize>(detector_kind.size()));
  write_u32(out, static_cast<uint32_t>(blob.size()));
  for (const auto& e : blob) {
    write_u32(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_u32(out, static_cast<uint32_t>(e.shape.size()));
    for (int d : e.shape) write_i64(out, d);
    write_i64(out, static_cast<int64_t>(e.data.size()));
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed for blob '" + path + "'");
}

ParameterBlob load_blob(const std::string& expected_kind, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open blob '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw CompatibilityError("blob '" + path + "': bad magic");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw CompatibilityError("blob '" + path + "': version " + std::to_string(version) +
                             ", expected " + std::to_string(kVersion));
  uint32_t klen = read_u32(in);
  std::string kind(klen, '\0');
  if (!in.read(kind.data(), klen)) throw ParseError("blob: truncated kind");
  if (kind != expected_kind)
    throw CompatibilityError("blob '" + path + "' holds a " + kind + " snapshot, expected " +
                             expected_kind);
  uint32_t count = read_u32(in);
  ParameterBlob blob(count);
  for (auto& e : blob) {
    uint32_t nlen = read_u32(in);
    e.name.resize(nlen);
    if (!in.read(e.name.data(), nlen)) throw ParseError("blob: truncated name");
    uint32_t ndims = read_u32(in);
    e.shape.resize(ndims);
    for (auto& d : e.shape) d = static_cast<int>(read_i64(in));
    int64_t len = read_i64(in);
    e.data.resize(static_cast<size_t>(len));
    if (!in.read(reinterpret_cast<char*>(e.data.data()),
                 static_cast<std::streamsize>(e.data.size() * sizeof(double))))
      throw ParseError("blob: truncated data for '" + e.name + "'");
  }
  return blob;
}

}  // namespace poisonlink
