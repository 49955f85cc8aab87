#include "dmssn/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace dmssn {

AdamW::AdamW(NamedParams params, const AdamWOptions& opts) : params_(std::move(params)), opts_(opts) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, steps_);
  const double bc2 = 1.0 - std::pow(opts_.beta2, steps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var p = params_[i].second;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const double decay = w.rank() >= 2 ? opts_.weight_decay : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = opts_.beta1 * m[k] + (1 - opts_.beta1) * g[k];
      v[k] = opts_.beta2 * v[k] + (1 - opts_.beta2) * g[k] * g[k];
      const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opts_.eps);
      w[k] -= lr * (update + decay * w[k]);
    }
  }
}

void AdamW::zero_grad() { zero_grads(params_); }

bool AdamW::tracks(const Var& v) const {
  for (const auto& [name, p] : params_) {
    if (p.node() == v.node()) return true;
  }
  return false;
}

double cosine_lr(double base, int step, int total_steps) {
  if (total_steps <= 0) return base;
  const double t = std::min(1.0, static_cast<double>(step) / total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

bool gradients_finite(const NamedParams& params) {
  for (const auto& [name, p] : params) {
    if (!p.grad().empty() && !p.grad().all_finite()) return false;
  }
  return true;
}

}  // namespace dmssn
