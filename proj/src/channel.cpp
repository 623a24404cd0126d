#include "poisonlink/channel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "poisonlink/errors.hpp"

namespace poisonlink {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// per-column tap oscillation periods, in blocks
constexpr int kColumnPeriods[4] = {51, 39, 33, 21};

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t TransmissionBlock::fingerprint() const {
  uint64_t h = fnv1a(&realization.block_index, sizeof(realization.block_index));
  h = fnv1a(realization.h_re.data(), realization.h_re.size() * sizeof(double), h);
  h = fnv1a(realization.h_im.data(), realization.h_im.size() * sizeof(double), h);
  h = fnv1a(&realization.sigma2, sizeof(double), h);
  return h;
}

std::string channel_kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::LinearTimeVarying: return "linear_tv";
    case ChannelKind::NonlinearTimeVarying: return "nonlinear_tv";
    case ChannelKind::LinearStatic: return "linear_static";
    case ChannelKind::TapFile: return "tap_file";
  }
  return "?";
}

ChannelKind channel_kind_from_name(const std::string& name) {
  if (name == "linear_tv") return ChannelKind::LinearTimeVarying;
  if (name == "nonlinear_tv") return ChannelKind::NonlinearTimeVarying;
  if (name == "linear_static") return ChannelKind::LinearStatic;
  if (name == "tap_file") return ChannelKind::TapFile;
  throw std::invalid_argument("unknown channel kind '" + name + "'");
}

void ChannelConfig::validate() const {
  if (n_tx <= 0 || n_rx <= 0) throw std::invalid_argument("channel: antenna counts must be positive");
  if (tanh_gain <= 0.0) throw std::invalid_argument("channel: nonlinearity gain k must be > 0");
  if (kind == ChannelKind::TapFile && tap_file.empty())
    throw std::invalid_argument("channel: kind tap_file requires a tap_file path");
}

double ChannelConfig::sigma2() const { return std::pow(10.0, -snr_db / 10.0); }

ChannelModel::ChannelModel(ChannelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.kind == ChannelKind::TapFile) {
    table_ = load_tap_file(cfg_.tap_file);
    if (table_.n_rx != cfg_.n_rx || table_.n_tx != cfg_.n_tx)
      throw std::invalid_argument("tap file is " + std::to_string(table_.n_rx) + "x" +
                                  std::to_string(table_.n_tx) + ", config wants " +
                                  std::to_string(cfg_.n_rx) + "x" + std::to_string(cfg_.n_tx));
    return;
  }
  Rng rng(Rng::mix(cfg_.seed ^ 0x6368616e6e656cULL));  // phases fixed per config seed
  phase_amp_.resize(static_cast<size_t>(cfg_.n_rx) * cfg_.n_tx);
  phase_rot_.resize(phase_amp_.size());
  for (auto& p : phase_amp_) p = rng.uniform(0.0, kTwoPi);
  for (auto& p : phase_rot_) p = rng.uniform(0.0, kTwoPi);
}

ChannelRealization ChannelModel::taps_at(int b) const {
  if (b < 0) throw std::out_of_range("taps_at: negative block index");
  ChannelRealization r;
  r.n_rx = cfg_.n_rx;
  r.n_tx = cfg_.n_tx;
  r.sigma2 = cfg_.sigma2();
  r.block_index = b;
  size_t n = static_cast<size_t>(cfg_.n_rx) * cfg_.n_tx;
  r.h_re.resize(n);
  r.h_im.resize(n);
  if (cfg_.kind == ChannelKind::TapFile) {
    if (b >= table_.blocks())
      throw std::out_of_range("taps_at: block " + std::to_string(b) + " beyond tap file with " +
                              std::to_string(table_.blocks()) + " blocks");
    const auto& row = table_.rows[b];
    for (size_t e = 0; e < n; ++e) {
      r.h_re[e] = row[2 * e];
      r.h_im[e] = row[2 * e + 1];
    }
    return r;
  }
  int bb = cfg_.kind == ChannelKind::LinearStatic ? 0 : b;
  for (int i = 0; i < cfg_.n_rx; ++i)
    for (int j = 0; j < cfg_.n_tx; ++j) {
      size_t e = static_cast<size_t>(i) * cfg_.n_tx + j;
      double decay = std::pow(0.8, std::abs(i - j));
      int period = kColumnPeriods[j % 4];
      double amp = 0.6 + 0.4 * std::cos(kTwoPi * bb / period + phase_amp_[e]);
      double mag = decay * amp;
      r.h_re[e] = mag * std::cos(phase_rot_[e]);
      r.h_im[e] = mag * std::sin(phase_rot_[e]);
    }
  return r;
}

ReceivedSymbol transmit(const std::vector<cxd>& x, const ChannelRealization& real,
                        const ChannelConfig& cfg, Rng& rng) {
  if (static_cast<int>(x.size()) != real.n_tx)
    throw std::invalid_argument("transmit: x has " + std::to_string(x.size()) + " entries, H wants " +
                                std::to_string(real.n_tx));
  double noise_comp = std::sqrt(real.sigma2 / 2.0);
  ReceivedSymbol y(real.n_rx);
  for (int i = 0; i < real.n_rx; ++i) {
    cxd acc(0.0, 0.0);
    for (int j = 0; j < real.n_tx; ++j) acc += real.h(i, j) * x[j];
    acc += cxd(noise_comp * rng.gaussian(), noise_comp * rng.gaussian());
    if (cfg.nonlinear()) {
      double k = cfg.tanh_gain;
      acc = cxd(std::tanh(k * acc.real()), std::tanh(k * acc.imag()));
    }
    y[i] = acc;
  }
  return y;
}

TransmissionBlock generate_block(const ChannelModel& model, int b, int l_pilot, int l_info, Rng& rng) {
  if (l_pilot <= 0 || l_info <= 0)
    throw std::invalid_argument("generate_block: partition sizes must be positive");
  const ChannelConfig& cfg = model.config();
  TransmissionBlock blk;
  blk.block_index = b;
  blk.realization = model.taps_at(b);
  auto fill = [&](int count, std::vector<ReceivedSymbol>& rx, std::vector<std::vector<int>>& labels) {
    rx.reserve(count);
    labels.reserve(count);
    for (int s = 0; s < count; ++s) {
      std::vector<int> lab(cfg.n_tx);
      for (int u = 0; u < cfg.n_tx; ++u) lab[u] = rng.uniform_int(0, kQpskOrder - 1);
      rx.push_back(transmit(modulate(lab), blk.realization, cfg, rng));
      labels.push_back(std::move(lab));
    }
  };
  fill(l_pilot, blk.pilot_rx, blk.pilot_labels);
  fill(l_info, blk.info_rx, blk.info_labels);
  return blk;
}

// ------------------------------------------------------------- tap files ----

namespace {

std::string tap_header(int n_rx, int n_tx) {
  std::string h = "block";
  char buf[32];
  for (int i = 0; i < n_rx; ++i)
    for (int j = 0; j < n_tx; ++j) {
      std::snprintf(buf, sizeof(buf), ",h%d%d_re,h%d%d_im", i, j, i, j);
      h += buf;
    }
  return h;
}

}  // namespace

TapTable load_tap_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tap file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty tap file '" + path + "'", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // infer dims from the header's last column name h{i}{j}_im
  size_t pos = line.rfind(",h");
  if (line.rfind("block", 0) != 0 || pos == std::string::npos)
    throw ParseError("tap file header must be 'block,h00_re,h00_im,...'", 1);
  int hi = -1, hj = -1;
  if (std::sscanf(line.c_str() + pos, ",h%1d%1d_im", &hi, &hj) != 2)
    throw ParseError("cannot parse tap header column '" + line.substr(pos + 1) + "'", 1);
  TapTable t;
  t.n_rx = hi + 1;
  t.n_tx = hj + 1;
  size_t want = static_cast<size_t>(t.n_rx) * t.n_tx * 2;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(want);
    std::stringstream ss(line);
    std::string field;
    bool first = true;
    while (std::getline(ss, field, ',')) {
      if (first) {  // block index column, informational
        first = false;
        continue;
      }
      try {
        size_t used = 0;
        double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("bad tap value '" + field + "' in '" + path + "'", lineno);
      }
    }
    if (first || row.size() != want)
      throw ParseError("expected " + std::to_string(want) + " tap columns, got " +
                           std::to_string(row.size()) + " in '" + path + "'",
                       lineno);
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ParseError("tap file '" + path + "' has no data rows", 2);
  return t;
}

void save_tap_file(const TapTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tap file '" + path + "'");
  out << tap_header(table.n_rx, table.n_tx) << "\n";
  char buf[40];
  for (int b = 0; b < table.blocks(); ++b) {
    out << b;
    for (double v : table.rows[b]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for tap file '" + path + "'");
}

TapTable make_cost2100_table(int blocks, int n_rx, int n_tx, uint64_t seed) {
  // Sum of slow sinusoids per entry: nearly flat between adjacent blocks,
  // with long-term excursions over many tens of blocks.
  TapTable t;
  t.n_rx = n_rx;
  t.n_tx = n_tx;
  Rng rng(Rng::mix(seed ^ 0x636f737432313030ULL));
  size_t entries = static_cast<size_t>(n_rx) * n_tx;
  std::vector<double> base_mag(entries), drift_period(entries), drift_phase(entries),
      ripple_period(entries), ripple_phase(entries), rot(entries), rot_rate(entries);
  for (size_t e = 0; e < entries; ++e) {
    int i = static_cast<int>(e) / n_tx, j = static_cast<int>(e) % n_tx;
    base_mag[e] = std::pow(0.8, std::abs(i - j)) * rng.uniform(0.55, 0.9);
    drift_period[e] = rng.uniform(110.0, 220.0);
    drift_phase[e] = rng.uniform(0.0, kTwoPi);
    ripple_period[e] = rng.uniform(45.0, 90.0);
    ripple_phase[e] = rng.uniform(0.0, kTwoPi);
    rot[e] = rng.uniform(0.0, kTwoPi);
    rot_rate[e] = rng.uniform(-0.02, 0.02);
  }
  t.rows.resize(blocks);
  for (int b = 0; b < blocks; ++b) {
    auto& row = t.rows[b];
    row.resize(entries * 2);
    for (size_t e = 0; e < entries; ++e) {
      double mag = base_mag[e] * (1.0 + 0.65 * std::sin(kTwoPi * b / drift_period[e] + drift_phase[e]) +
                                  0.12 * std::sin(kTwoPi * b / ripple_period[e] + ripple_phase[e]));
      double ang = rot[e] + rot_rate[e] * b;
      row[2 * e] = mag * std::cos(ang);
      row[2 * e + 1] = mag * std::sin(ang);
    }
  }
  return t;
}

}  // namespace poisonlink
