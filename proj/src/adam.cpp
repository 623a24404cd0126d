#include "poisonlink/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "poisonlink/errors.hpp"

namespace poisonlink {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    if (!p.requires_grad()) throw std::invalid_argument("Adam: parameter is not taped");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    auto& val = params_[pi].value_mut();
    const auto& g = params_[pi].grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < val.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("Adam: non-finite gradient at parameter " + std::to_string(pi));
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m[i] / c1;
      double vhat = v[i] / c2;
      val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void sgd_step(std::vector<Tensor>& params, double lr) {
  for (auto& p : params) {
    auto& val = p.value_mut();
    const auto& g = p.grad();
    for (size_t i = 0; i < val.size(); ++i) val[i] -= lr * g[i];
  }
}

}  // namespace poisonlink
