#pragma once

#include <cstdint>
#include <vector>

#include "csifb/tensor.hpp"

namespace csifb {

/// Bias-corrected ADAM. One state instance owns the moment accumulators
/// for a fixed parameter list; step() reads each tensor's .g and updates
/// .v in place. Gradients are not zeroed here — the caller resets them
/// explicitly between optimizer steps.
class AdamState {
 public:
  explicit AdamState(const std::vector<Tensor*>& params, double beta1 = 0.9,
                     double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);

  std::int64_t step_count() const { return t_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_;  // first moments
  std::vector<std::vector<double>> v_;  // second moments
  std::int64_t t_ = 0;
  double beta1_, beta2_, eps_;
};

}  // namespace csifb
