#include "poisonlink/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "poisonlink/adam.hpp"
#include "poisonlink/errors.hpp"

namespace poisonlink {

void OnlineConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("training: epochs must be >= 0");
  if (lr <= 0 || meta_lr <= 0) throw std::invalid_argument("training: learning rates must be > 0");
  if (meta_window <= 0 || meta_epochs < 0 || inner_steps < 1)
    throw std::invalid_argument("training: bad meta configuration");
  if (support_frac <= 0.0 || support_frac >= 1.0)
    throw std::invalid_argument("training: support_frac must lie in (0,1)");
}

void JointConfig::validate() const {
  if (snr_grid.empty()) throw std::invalid_argument("joint: SNR grid must be nonempty");
  if (symbols_per_snr <= 0) throw std::invalid_argument("joint: L_sur must be > 0");
  if (block_span <= 0 || epochs <= 0 || lr <= 0) throw std::invalid_argument("joint: bad config");
}

PilotSet pilots_of(const TransmissionBlock& block) {
  return {feature_matrix(block.pilot_rx), block.pilot_labels};
}

PilotSet subset(const PilotSet& p, const std::vector<int>& rows) {
  int width = p.features.dim(1);
  std::vector<double> data;
  data.reserve(rows.size() * width);
  std::vector<std::vector<int>> labels;
  labels.reserve(rows.size());
  const auto& fv = p.features.value();
  for (int r : rows) {
    const double* src = &fv[static_cast<size_t>(r) * width];
    data.insert(data.end(), src, src + width);
    labels.push_back(p.labels.at(r));
  }
  return {Tensor::from({static_cast<int>(rows.size()), width}, std::move(data)), std::move(labels)};
}

MetaBuffer::MetaBuffer(int capacity) : capacity_(capacity) {
  if (capacity <= 0) throw std::invalid_argument("MetaBuffer: capacity must be > 0");
}

void MetaBuffer::push(PilotSet p) {
  window_.push_back(std::move(p));
  while (static_cast<int>(window_.size()) > capacity_) window_.pop_front();
}

void online_adapt(Detector& d, const PilotSet& pilots, const OnlineConfig& cfg) {
  if (pilots.count() == 0) throw std::invalid_argument("online_adapt: empty pilot set");
  if (cfg.epochs == 0) return;  // parameters untouched
  d.set_train_mode(true);
  Adam opt(d.parameters(), {.lr = cfg.lr});
  for (int e = 0; e < cfg.epochs; ++e) {
    opt.zero_grad();
    Tensor loss = d.loss_on(pilots.features, pilots.labels);
    double lv = loss.item();
    if (!std::isfinite(lv))
      throw TrainingAborted("online_adapt: non-finite loss " + std::to_string(lv) + " at epoch " +
                            std::to_string(e + 1) + " of " + std::to_string(cfg.epochs) +
                            " (pilot batch " + std::to_string(pilots.count()) + ")");
    loss.backward();
    opt.step();
  }
}

namespace {

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

double finite_loss(Detector& d, const PilotSet& s, const char* where) {
  Tensor loss = d.loss_on(s.features, s.labels);
  double lv = loss.item();
  if (!std::isfinite(lv)) throw TrainingAborted(std::string(where) + ": non-finite loss");
  loss.backward();
  return lv;
}

}  // namespace

void meta_adapt(Detector& d, const MetaBuffer& buffer, const PilotSet& current,
                const OnlineConfig& cfg, Rng& rng) {
  if (buffer.empty()) {
    online_adapt(d, current, cfg);
    return;
  }
  d.set_train_mode(true);
  auto params = d.parameters();
  std::vector<std::vector<double>> theta(params.size());
  std::vector<std::vector<double>> query_grad(params.size());
  for (int me = 0; me < cfg.meta_epochs; ++me) {
    const PilotSet& block = buffer.at(rng.uniform_int(0, buffer.size() - 1));
    // disjoint support/query halves of this block's pilots
    std::vector<int> order(block.count());
    std::iota(order.begin(), order.end(), 0);
    for (int i = block.count() - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    int n_support = std::max(1, static_cast<int>(block.count() * cfg.support_frac));
    if (n_support >= block.count()) n_support = block.count() - 1;
    PilotSet support = subset(block, {order.begin(), order.begin() + n_support});
    PilotSet query = subset(block, {order.begin() + n_support, order.end()});

    for (size_t i = 0; i < params.size(); ++i) theta[i] = params[i].value();
    // inner: plain SGD step(s) on the support loss
    for (int k = 0; k < cfg.inner_steps; ++k) {
      zero_grads(params);
      finite_loss(d, support, "meta_adapt/inner");
      sgd_step(params, cfg.lr);
    }
    // first-order outer step: query-loss gradient at the adapted weights
    zero_grads(params);
    finite_loss(d, query, "meta_adapt/outer");
    for (size_t i = 0; i < params.size(); ++i) query_grad[i] = params[i].grad();
    for (size_t i = 0; i < params.size(); ++i) {
      auto& val = params[i].value_mut();
      for (size_t j = 0; j < val.size(); ++j) val[j] = theta[i][j] - cfg.meta_lr * query_grad[i][j];
    }
  }
  zero_grads(params);
  online_adapt(d, current, cfg);
}

JointDataset build_joint_dataset(const ChannelConfig& system_channel, const JointConfig& cfg,
                                 Rng& rng) {
  cfg.validate();
  // The attacker's corpus comes from the linear time-varying synthetic family
  // with the system's antenna geometry, swept over the SNR grid.
  ChannelConfig family = system_channel;
  family.kind = ChannelKind::LinearTimeVarying;
  family.tap_file.clear();

  int width = 2 * family.n_rx;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<int>> labels;
  rows.reserve(cfg.snr_grid.size() * cfg.symbols_per_snr);
  labels.reserve(rows.capacity());
  for (double snr : cfg.snr_grid) {
    ChannelConfig cc = family;
    cc.snr_db = snr;
    ChannelModel model(cc);
    int per_block = cfg.symbols_per_snr / cfg.block_span;
    int remainder = cfg.symbols_per_snr % cfg.block_span;
    for (int b = 0; b < cfg.block_span; ++b) {
      int count = per_block + (b < remainder ? 1 : 0);
      if (count == 0) continue;
      ChannelRealization real = model.taps_at(b);
      for (int s = 0; s < count; ++s) {
        std::vector<int> lab(cc.n_tx);
        for (int u = 0; u < cc.n_tx; ++u) lab[u] = rng.uniform_int(0, kQpskOrder - 1);
        rows.push_back(real_features(transmit(modulate(lab), real, cc, rng)));
        labels.push_back(std::move(lab));
      }
    }
  }
  // shuffle once; training below is full-batch so this only decorrelates any
  // order-dependent downstream consumers
  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  std::vector<double> data;
  data.reserve(rows.size() * width);
  std::vector<std::vector<int>> shuffled;
  shuffled.reserve(labels.size());
  for (int idx : order) {
    data.insert(data.end(), rows[idx].begin(), rows[idx].end());
    shuffled.push_back(std::move(labels[idx]));
  }
  return {Tensor::from({static_cast<int>(order.size()), width}, std::move(data)), std::move(shuffled)};
}

std::unique_ptr<Detector> joint_train(const SystemDims& dims, const ChannelConfig& system_channel,
                                      const JointConfig& cfg, Rng& rng) {
  JointDataset ds = build_joint_dataset(system_channel, cfg, rng);
  Rng init_rng = rng.fork(0x4a4f494e54ULL);
  auto surrogate = make_detector("BlackBoxMLP", dims, init_rng);
  Adam opt(surrogate->parameters(), {.lr = cfg.lr});
  for (int e = 0; e < cfg.epochs; ++e) {
    opt.zero_grad();
    Tensor loss = surrogate->loss_on(ds.features, ds.labels);
    if (!std::isfinite(loss.item())) throw TrainingAborted("joint_train: non-finite loss");
    loss.backward();
    opt.step();
  }
  return surrogate;
}

}  // namespace poisonlink
