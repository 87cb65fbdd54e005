#pragma once

#include "csifb/cs_baselines.hpp"
#include "csifb/dataset.hpp"
#include "csifb/metrics.hpp"
#include "csifb/models.hpp"

namespace csifb {

struct EvalOptions {
  int max_groups = 0;       // 0 = whole test split
  int runtime_repeats = 5;  // passes for the per-frame timing
  int runtime_frames = 8;   // frames timed per pass
  int threads = 1;
  bool with_runtime = true;
};

EvalResult evaluate_csinet(const Dataset& ds, CsiNetParams& params, const EvalOptions& opts);
EvalResult evaluate_csinet_lstm(const Dataset& ds, CsiNetLstmParams& params,
                                const EvalOptions& opts);

/// Builds the sensing matrix from (dataset seed, CR), tunes the
/// regularization weight on the validation split, then scores the test
/// split. max_iters <= 0 keeps the per-algorithm default.
EvalResult evaluate_baseline(const Dataset& ds, RecoveryAlgorithm alg, double cr,
                             const EvalOptions& opts, int max_iters = 0);

std::string baseline_name(RecoveryAlgorithm alg);

/// Deterministic sensing matrix for a dataset/CR pair.
SensingMatrix sensing_for(const Dataset& ds, double cr);

RecoveryConfig default_recovery_config(RecoveryAlgorithm alg, const Dataset& ds);

}  // namespace csifb
