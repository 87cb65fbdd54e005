#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "csifb/rng.hpp"

namespace csifb {

constexpr double kSpeedOfLight = 299792458.0;

/// Scenario parameters for the time-varying MIMO-OFDM channel generator.
/// Desk-scale defaults; paper-scale shapes (256/32/32, T=10) are supported
/// for forward-pass checks but not for training.
struct ScenarioConfig {
  int n_subcarriers = 64;       // N_c
  int n_tx = 8;                 // N_t, half-wavelength ULA
  int n_delay_trunc = 8;        // N_c', retained delay rows
  double bandwidth_hz = 20e6;
  double f0_hz = 300e6;         // carrier
  double ue_speed_mps = 0.9;    // v
  double feedback_interval_s = 0.04;  // delta t
  int group_len = 4;            // T
  int n_paths = 6;
  std::uint64_t seed = 1;
  bool on_grid_delays = false;

  void validate() const;
  /// Upper delay edge: 0.8 * N_c' / bandwidth keeps off-grid leakage inside
  /// the truncation window.
  double max_delay_s() const { return 0.8 * n_delay_trunc / bandwidth_hz; }
  double max_doppler_hz() const { return ue_speed_mps * f0_hz / kSpeedOfLight; }
};

struct Path {
  std::complex<double> gain;
  double delay_s;
  double angle_rad;    // broadside convention
  double doppler_hz;
};

struct PathSet {
  std::vector<Path> paths;
};

/// Complex spatial-frequency CSI matrix at one time step (N_c x N_t).
struct ChannelFrame {
  Eigen::MatrixXcd h;
  std::int64_t t_index = 0;
  double wall_time_s = 0.0;
};

/// Coherence time c / (2 v f0). Throws for v == 0 (static channel).
double coherence_time(double v_mps, double f0_hz);

/// Draws a multipath set: delays uniform in [0, max_delay] (snapped to the
/// 1/bandwidth grid when on_grid_delays), sin(angle) uniform in [-1,1],
/// Doppler (v f0 / c) cos(psi) with psi uniform, complex Gaussian gains
/// scaled so E||H||_F^2 = N_c * N_t.
PathSet sample_paths(const ScenarioConfig& config, Rng& rng);

/// Sum-of-paths channel at absolute time t:
///   H[n][m] = sum_p g_p exp(-j 2 pi f_n tau_p) exp(j pi m sin(theta_p))
///             exp(j 2 pi nu_p t),  f_n = n * bandwidth / N_c.
ChannelFrame channel_at(const PathSet& paths, double t_s, const ScenarioConfig& config);

/// H' = F_d H F_a with unitary DFT matrices (delay concentration on the
/// left, angle on the right). Exact inverse: from_angular_delay.
Eigen::MatrixXcd to_angular_delay(const Eigen::MatrixXcd& h);
Eigen::MatrixXcd from_angular_delay(const Eigen::MatrixXcd& h_ad);

/// First n_keep delay rows, order preserved.
Eigen::MatrixXcd truncate_delay(const Eigen::MatrixXcd& h_ad, int n_keep);

}  // namespace csifb
