#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csifb/channel.hpp"
#include "csifb/dataset.hpp"

namespace csifb {

using FrameSeq = std::vector<AngularDelayFrame>;

/// Normalized MSE over grouped frames, computed on the denormalized
/// truncated angular-delay matrices:
///   mean over groups of (1/T) sum_t ||H_t - H^_t||^2 / ||H_t||^2,
/// reported in dB (clamped at -300 for exact reconstruction), with the
/// t = 1 vs t = 2..T breakdown in both linear and dB form.
struct NmseResult {
  double db = 0.0;
  double db_t1 = 0.0;
  double db_trest = 0.0;
  double lin = 0.0;
  double lin_t1 = 0.0;
  double lin_trest = 0.0;
  std::int64_t skipped_frames = 0;  // zero-norm truth frames
};
NmseResult nmse(const std::vector<FrameSeq>& truth, const std::vector<FrameSeq>& recon);

double nmse_db_clamp(double linear);

/// Denormalize, zero-pad the delay rows back to N_c, inverse 2D-DFT.
ChannelFrame reconstruct_spatial_freq(const AngularDelayFrame& fr, int n_subcarriers);

/// Mean per-subcarrier cosine similarity between reconstructed and true
/// spatial-frequency channel vectors (rows of the frames). Scale and
/// phase invariant; always in [0,1].
struct RhoResult {
  double rho = 0.0;
  std::int64_t skipped_terms = 0;  // zero-norm rows
};
RhoResult rho(const std::vector<Eigen::MatrixXcd>& truth,
              const std::vector<Eigen::MatrixXcd>& recon);

/// Median wall time per frame over `repeats` timed passes of
/// run_all_frames (which must process n_frames frames); one untimed
/// warm-up pass runs first. repeats must be >= 3.
double runtime_benchmark(const std::function<void()>& run_all_frames, int n_frames,
                         int repeats);

struct EvalResult {
  std::string method;
  double cr = 0.0;
  double nmse_db = 0.0;
  double rho = 0.0;
  double runtime_s_per_frame = 0.0;
  double nmse_t1_db = 0.0;
  double nmse_trest_db = 0.0;
  double degradation_pct = 0.0;  // filled by make_report per method across CRs

  bool operator==(const EvalResult&) const = default;
};

/// Table-style report. The degradation column is the percentage NMSE
/// loss from each method's highest CR to its lowest:
///   100 * (nmse_db(lowest CR) - nmse_db(highest CR)) / |nmse_db(highest CR)|.
struct Report {
  std::vector<EvalResult> results;  // with degradation filled in
  std::string human_table;          // aligned text
  std::string tsv;                  // fixed column order, tab separated
  std::string json;                 // machine-readable structured form
};
Report make_report(std::vector<EvalResult> results);
std::vector<EvalResult> parse_report_json(const std::string& json_text);

/// "1/16" for 0.0625; falls back to decimal for non-reciprocal ratios.
std::string cr_label(double cr);

}  // namespace csifb
