#include "covis/net/optim.hpp"

#include <cmath>
#include <numbers>

#include "covis/errors.hpp"

namespace covis::net {

double LrSchedule::at(int step) const {
  if (step < 0) return 0.0;
  if (step < warmup) return peak * static_cast<double>(step) / warmup;
  const int span = total - warmup;
  if (span <= 0) return peak;
  if (step >= total) return 0.0;
  const double progress = static_cast<double>(step - warmup) / span;
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ModelParameters& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& p : params.values) {
    m_.emplace_back(p.rows, p.cols, 0.0);
    v_.emplace_back(p.rows, p.cols, 0.0);
  }
}

void AdamW::step(ModelParameters& params, const std::vector<Matrix>& grads, double lr, const std::vector<bool>& mask) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw ConfigError("optimizer: gradient count does not match parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    Matrix& w = params.values[i];
    const Matrix& g = grads[i];
    if (!g.same_shape(w)) throw ConfigError("optimizer: gradient shape mismatch for " + params.info[i].name);
    const double decay = params.info[i].decay ? cfg_.weight_decay : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      double& m = m_[i].v[k];
      double& v = v_[i].v[k];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g.v[k];
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.v[k] * g.v[k];
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      w.v[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + decay * w.v[k]);
    }
  }
}

}  // namespace covis::net
