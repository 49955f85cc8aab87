#pragma once

#include <vector>

#include "dmssn/autograd.hpp"

namespace dmssn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // applied to rank >= 2 tensors only
};

/// Adam with decoupled weight decay. Holds moment buffers only for the
/// parameters it was built with.
class AdamW {
 public:
  AdamW(NamedParams params, const AdamWOptions& opts = {});

  /// One update from the accumulated gradients; parameters without a
  /// gradient are left alone. Gradients are not cleared.
  void step(double lr);
  void zero_grad();

  int steps() const { return steps_; }
  const NamedParams& params() const { return params_; }
  bool tracks(const Var& v) const;

 private:
  NamedParams params_;
  AdamWOptions opts_;
  std::vector<Tensor> m_, v_;
  int steps_ = 0;
};

/// Cosine decay from `base` at step 0 to 0 at `total_steps`.
double cosine_lr(double base, int step, int total_steps);

/// True when every gradient buffer is finite.
bool gradients_finite(const NamedParams& params);

}  // namespace dmssn
