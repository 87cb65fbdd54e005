#include "csifb/channel.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace csifb {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

// Unitary DFT pair used for the angular-delay transform. The delay-side
// matrix carries a positive exponent so that a path at delay k/bandwidth
// lands in row k; the angle-side matrix is the standard DFT so that
// sin(theta) = 2l/N_t lands in column l.
const Eigen::MatrixXcd& delay_dft(int n) {
  static std::mutex mu;
  static std::map<int, Eigen::MatrixXcd> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXcd f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      f(k, j) = std::polar(norm, kTwoPi * k * j / n);
  return cache.emplace(n, std::move(f)).first->second;
}

const Eigen::MatrixXcd& angle_dft(int n) {
  static std::mutex mu;
  static std::map<int, Eigen::MatrixXcd> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXcd f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int m = 0; m < n; ++m)
    for (int q = 0; q < n; ++q)
      f(m, q) = std::polar(norm, -kTwoPi * m * q / n);
  return cache.emplace(n, std::move(f)).first->second;
}

}  // namespace

void ScenarioConfig::validate() const {
  std::ostringstream err;
  if (n_subcarriers < 1 || n_tx < 1 || n_delay_trunc < 1 || group_len < 1 || n_paths < 1)
    err << "all dimensions must be positive; ";
  if (n_delay_trunc > n_subcarriers)
    err << "retained delay rows (" << n_delay_trunc << ") exceed subcarrier count ("
        << n_subcarriers << "); ";
  if (bandwidth_hz <= 0.0 || f0_hz <= 0.0) err << "bandwidth and carrier must be positive; ";
  if (feedback_interval_s <= 0.0) err << "feedback interval must be positive; ";
  if (ue_speed_mps < 0.0) err << "UE speed must be non-negative; ";
  if (ue_speed_mps > 0.0) {
    const double dt = coherence_time(ue_speed_mps, f0_hz);
    const double span = feedback_interval_s * group_len;
    if (span > dt) {
      err << "feedback window delta_t*T = " << span
          << " s exceeds the coherence time c/(2*v*f0) = " << dt
          << " s; shrink T or the feedback interval; ";
    }
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw std::invalid_argument("scenario config: " + msg);
}

double coherence_time(double v_mps, double f0_hz) {
  if (v_mps == 0.0)
    throw std::invalid_argument("static channel: coherence time unbounded");
  if (v_mps < 0.0 || f0_hz <= 0.0)
    throw std::invalid_argument("coherence_time: v and f0 must be positive");
  return kSpeedOfLight / (2.0 * v_mps * f0_hz);
}

PathSet sample_paths(const ScenarioConfig& config, Rng& rng) {
  if (config.n_paths < 1) throw std::invalid_argument("sample_paths: n_paths must be >= 1");
  PathSet out;
  out.paths.reserve(config.n_paths);
  const double max_delay = config.max_delay_s();
  const double nu_max = config.max_doppler_hz();
  const double gain_scale = 1.0 / std::sqrt(static_cast<double>(config.n_paths));
  for (int p = 0; p < config.n_paths; ++p) {
    Path path;
    double delay = rng.uniform(0.0, max_delay);
    if (config.on_grid_delays) {
      delay = std::floor(delay * config.bandwidth_hz) / config.bandwidth_hz;
    }
    path.delay_s = delay;
    path.angle_rad = std::asin(rng.uniform(-1.0, 1.0));
    path.doppler_hz = nu_max * std::cos(rng.uniform(0.0, kTwoPi));
    path.gain = gain_scale * std::complex<double>(rng.gaussian(), rng.gaussian()) /
                std::sqrt(2.0);
    out.paths.push_back(path);
  }
  return out;
}

ChannelFrame channel_at(const PathSet& paths, double t_s, const ScenarioConfig& config) {
  const int nc = config.n_subcarriers;
  const int nt = config.n_tx;
  ChannelFrame frame;
  frame.h = Eigen::MatrixXcd::Zero(nc, nt);
  frame.wall_time_s = t_s;

  Eigen::VectorXcd freq_sig(nc);
  Eigen::RowVectorXcd ant_sig(nt);
  const double df = config.bandwidth_hz / nc;
  for (const Path& p : paths.paths) {
    for (int n = 0; n < nc; ++n)
      freq_sig(n) = std::polar(1.0, -kTwoPi * (n * df) * p.delay_s);
    const double sin_theta = std::sin(p.angle_rad);
    for (int m = 0; m < nt; ++m)
      ant_sig(m) = std::polar(1.0, kTwoPi * 0.5 * m * sin_theta);
    const std::complex<double> g = p.gain * std::polar(1.0, kTwoPi * p.doppler_hz * t_s);
    frame.h.noalias() += g * (freq_sig * ant_sig);
  }
  return frame;
}

Eigen::MatrixXcd to_angular_delay(const Eigen::MatrixXcd& h) {
  return delay_dft(static_cast<int>(h.rows())) * h * angle_dft(static_cast<int>(h.cols()));
}

Eigen::MatrixXcd from_angular_delay(const Eigen::MatrixXcd& h_ad) {
  return delay_dft(static_cast<int>(h_ad.rows())).adjoint() * h_ad *
         angle_dft(static_cast<int>(h_ad.cols())).adjoint();
}

Eigen::MatrixXcd truncate_delay(const Eigen::MatrixXcd& h_ad, int n_keep) {
  if (n_keep < 1 || n_keep > h_ad.rows())
    throw std::invalid_argument("truncate_delay: n_keep out of range");
  return h_ad.topRows(n_keep);
}

}  // namespace csifb
