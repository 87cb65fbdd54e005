#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csifb/graph.hpp"

namespace csifb {

/// Builds a scalar loss over the given parameters. Called repeatedly with
/// perturbed parameter values, so it must be a pure function of them.
using LossBuilder = std::function<VarId(Graph&, const std::vector<Tensor*>&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;  // "param<k>[i]"
};

/// Central finite differences against the analytic reverse pass.
/// Relative error per element: |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const LossBuilder& build, const std::vector<Tensor*>& params,
                           double h = 1e-5);

}  // namespace csifb
