#pragma once

#include <cstdint>
#include <vector>

#include "covis/net/model.hpp"

namespace covis::net {

/// Linear warmup from 0 to `peak` over `warmup` steps, then cosine decay to 0
/// at `total`.
struct LrSchedule {
  double peak = 1.5e-4;
  int warmup = 0;
  int total = 1;
  double at(int step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Decoupled weight decay, applied only to parameters flagged `decay`.
class AdamW {
 public:
  AdamW(const ModelParameters& params, AdamWConfig cfg = {});

  /// One update of every parameter with mask[i] set (empty mask = all).
  void step(ModelParameters& params, const std::vector<Matrix>& grads, double lr,
            const std::vector<bool>& mask = {});
  std::int64_t steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

}  // namespace covis::net
