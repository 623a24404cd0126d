#include "poisonlink/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "poisonlink/errors.hpp"

namespace poisonlink {

void AttackConfig::validate() const {
  if (eps <= 0.0) throw std::invalid_argument("attack: eps must be > 0");
  if (step <= 0.0) throw std::invalid_argument("attack: step must be > 0");
  if (iters < 1) throw std::invalid_argument("attack: iteration count must be >= 1");
  if (period < 1) throw std::invalid_argument("attack: period must be >= 1");
}

ClipBounds compute_clip_bounds(const std::vector<ReceivedSymbol>& pilots,
                               AttackConfig::BoundRule rule) {
  if (pilots.empty()) throw std::invalid_argument("compute_clip_bounds: empty pilot set");
  double m = 0.0;
  for (const auto& y : pilots)
    for (const auto& v : y) {
      if (rule == AttackConfig::BoundRule::MaxAbsFeature)
        m = std::max({m, std::abs(v.real()), std::abs(v.imag())});
      else
        m = std::max(m, std::abs(v));
    }
  return {-m, m};
}

PoisonedPilotSet pgd_poison(Detector& surrogate, const std::vector<ReceivedSymbol>& pilots,
                            const std::vector<std::vector<int>>& labels, const AttackConfig& cfg,
                            Rng& rng) {
  if (pilots.size() != labels.size())
    throw std::invalid_argument("pgd_poison: pilot/label misalignment");
  if (pilots.empty()) throw std::invalid_argument("pgd_poison: empty pilot set");
  surrogate.set_train_mode(false);

  ClipBounds bounds{-cfg.clip_abs, cfg.clip_abs};
  if (std::isnan(cfg.clip_abs)) bounds = compute_clip_bounds(pilots, cfg.bound_rule);

  const int n = static_cast<int>(pilots.size());
  Tensor x0 = feature_matrix(pilots);
  const int width = x0.dim(1);
  const auto& orig = x0.value();

  auto clip = [&](double v) { return std::min(bounds.hi, std::max(bounds.lo, v)); };

  // random start inside the eps box, clamped to the I bounds
  Tensor x = x0.clone();
  {
    auto& xv = x.value_mut();
    for (auto& v : xv) v = clip(v + rng.uniform(-cfg.eps, cfg.eps));
  }
  x.set_requires_grad(true);

  PoisonedPilotSet out;
  out.bounds = bounds;
  out.labels = labels;
  std::vector<bool> dead(n, false);

  double last_loss = 0.0;
  auto loss_fn = [&](const Tensor& in) {
    Tensor loss = surrogate.loss_on(in, labels);
    last_loss = loss.item();
    return loss;
  };

  out.loss_trace.reserve(cfg.iters + 1);
  for (int it = 0; it < cfg.iters; ++it) {
    Tensor g = input_grad(x, loss_fn);
    out.loss_trace.push_back(last_loss);
    const auto& gv = g.value();
    auto& xv = x.value_mut();
    for (int r = 0; r < n; ++r) {
      if (dead[r]) continue;
      const double* gr = &gv[static_cast<size_t>(r) * width];
      bool nan_row = false;
      for (int c = 0; c < width; ++c)
        if (!std::isfinite(gr[c])) {
          nan_row = true;
          break;
        }
      if (nan_row) {
        dead[r] = true;
        continue;
      }
      double* xr = &xv[static_cast<size_t>(r) * width];
      const double* x0r = &orig[static_cast<size_t>(r) * width];
      for (int c = 0; c < width; ++c) {
        double sg = gr[c] > 0.0 ? 1.0 : (gr[c] < 0.0 ? -1.0 : 0.0);
        double base = cfg.accumulate ? xr[c] : x0r[c];
        double v = clip(base + cfg.step * sg);
        double d = std::min(cfg.eps, std::max(-cfg.eps, v - x0r[c]));
        xr[c] = x0r[c] + d;
      }
    }
  }
  {
    // the eps projection ran last; re-apply the I clamp (originals lie within
    // the bounds, so the eps box survives)
    auto& xv = x.value_mut();
    for (auto& v : xv) v = clip(v);
    NoGradGuard ng;
    Tensor loss = surrogate.loss_on(x, labels);
    out.loss_trace.push_back(loss.item());
  }

  out.originals.resize(n);
  out.perturbed.resize(n);
  out.delta.resize(n);
  const auto& xv = x.value();
  for (int r = 0; r < n; ++r) {
    out.originals[r].assign(&orig[static_cast<size_t>(r) * width],
                            &orig[static_cast<size_t>(r) * width] + width);
    if (dead[r]) {
      out.skipped.push_back(r);
      out.perturbed[r] = out.originals[r];
    } else {
      out.perturbed[r].assign(&xv[static_cast<size_t>(r) * width],
                              &xv[static_cast<size_t>(r) * width] + width);
    }
    out.delta[r].resize(width);
    for (int c = 0; c < width; ++c) out.delta[r][c] = out.perturbed[r][c] - out.originals[r][c];
  }
  return out;
}

TransmissionBlock inject(const TransmissionBlock& block, const PoisonedPilotSet& poison) {
  if (poison.empty()) return block;
  if (poison.originals.size() != block.pilot_rx.size())
    throw std::invalid_argument("inject: poison set covers " + std::to_string(poison.originals.size()) +
                                " pilots, block has " + std::to_string(block.pilot_rx.size()));
  for (size_t i = 0; i < block.pilot_rx.size(); ++i)
    if (real_features(block.pilot_rx[i]) != poison.originals[i])
      throw std::invalid_argument("inject: poison set was generated from different pilots (symbol " +
                                  std::to_string(i) + ")");
  TransmissionBlock out = block;
  for (size_t i = 0; i < out.pilot_rx.size(); ++i)
    out.pilot_rx[i] = features_to_symbol(poison.perturbed[i]);
  return out;
}

namespace {

std::vector<double> input_gradient_at(Detector& model, const ReceivedSymbol& y,
                                      const std::vector<int>& s) {
  model.set_train_mode(false);
  Tensor x = feature_matrix({y});
  x.set_requires_grad(true);
  std::vector<std::vector<int>> labels{s};
  Tensor g = input_grad(x, [&](const Tensor& in) { return model.loss_on(in, labels); });
  return g.value();
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> l2_optimal_delta(Detector& model, const ReceivedSymbol& y,
                                     const std::vector<int>& s, double eps) {
  std::vector<double> g = input_gradient_at(model, y, s);
  double n = l2_norm(g);
  if (n == 0.0) throw DegenerateGradient("l2_optimal_delta: zero input gradient");
  for (double& v : g) v *= eps / n;
  return g;
}

TransferDiagnostic transfer_diagnostic(Detector& surrogate, Detector& target,
                                       const ReceivedSymbol& y, const std::vector<int>& s,
                                       double eps) {
  std::vector<double> gs = input_gradient_at(surrogate, y, s);
  std::vector<double> gt = input_gradient_at(target, y, s);
  double ns = l2_norm(gs), nt = l2_norm(gt);
  if (ns == 0.0) throw DegenerateGradient("transfer_diagnostic: zero surrogate gradient");
  if (nt == 0.0) throw DegenerateGradient("transfer_diagnostic: zero target gradient, cosine undefined");
  double dot = 0.0;
  for (size_t i = 0; i < gs.size(); ++i) dot += gs[i] * gt[i];
  TransferDiagnostic d;
  d.dl_actual = eps * dot / ns;
  d.dl_bound = eps * nt;
  d.grad_cosine = dot / (ns * nt);
  return d;
}

void export_poison_csv(const std::string& path, const std::vector<PoisonedPilotSet>& sets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write poison csv '" + path + "'");
  if (sets.empty()) throw std::invalid_argument("export_poison_csv: nothing to export");
  int width = static_cast<int>(sets.front().originals.at(0).size());
  int users = static_cast<int>(sets.front().labels.at(0).size());
  out << "block,symbol_index";
  for (int c = 0; c < width; ++c) out << ",c" << c;
  for (int c = 0; c < width; ++c) out << ",p" << c;
  for (int u = 0; u < users; ++u) out << ",s" << u;
  out << "\n";
  char buf[40];
  for (const auto& set : sets)
    for (int i = 0; i < set.count(); ++i) {
      out << set.block_index << "," << i;
      for (double v : set.originals[i]) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out << buf;
      }
      for (double v : set.perturbed[i]) {
        std::snprintf(buf, sizeof(buf), ",%.17g", v);
        out << buf;
      }
      for (int v : set.labels[i]) out << "," << v;
      out << "\n";
    }
  if (!out) throw std::runtime_error("write failed for poison csv '" + path + "'");
}

}  // namespace poisonlink
