#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "csifb/channel.hpp"

namespace csifb {

/// Dataset-global affine map: normalized = (raw - offset) / scale.
/// Computed once over the training split with real and imaginary parts
/// pooled, then applied to every split.
struct NormStats {
  double offset = 0.0;
  double scale = 1.0;
};

/// Truncated angular-delay frame as two real planes normalized to [0,1].
/// The affine constants ride along so denormalization is exact.
struct AngularDelayFrame {
  Eigen::MatrixXd re;  // N_c' x N_t
  Eigen::MatrixXd im;
  double norm_offset = 0.0;
  double norm_scale = 1.0;

  Eigen::MatrixXcd denormalize() const;
};

/// Normalizes a truncated complex matrix. Elements outside the training
/// range are clamped; *clamp_count (when given) accumulates how many.
AngularDelayFrame normalize(const Eigen::MatrixXcd& h_trunc, const NormStats& stats,
                            std::int64_t* clamp_count = nullptr);

/// T frames sharing one coherence window, feedback_interval_s apart.
struct ChannelGroup {
  std::vector<AngularDelayFrame> frames;
  std::int64_t group_id = 0;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

struct Dataset {
  ScenarioConfig config;
  NormStats stats;
  std::vector<ChannelGroup> train;
  std::vector<ChannelGroup> val;
  std::vector<ChannelGroup> test;
  std::int64_t clamp_warnings = 0;  // val/test elements outside the train range
};

/// Generates grouped channel data. Each group draws an independent path
/// set from its own RNG stream keyed by (seed, split, group index), so
/// parallel and serial generation produce identical bytes. Refuses
/// configurations whose feedback window exceeds the coherence time.
Dataset generate_dataset(const ScenarioConfig& config, const SplitCounts& counts);

/// Dataset file: text key-value header terminated by "end_header", then
/// raw little-endian float32 planes per split in declared order
/// (group-major, frame-major, real plane then imaginary, row-major).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace csifb
