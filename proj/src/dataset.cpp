#include "csifb/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "csifb/serial.hpp"

namespace csifb {

namespace {

constexpr int kFormatVersion = 1;

enum SplitId : std::uint64_t { kTrain = 0, kVal = 1, kTest = 2 };

/// Raw truncated angular-delay frames for one group.
std::vector<Eigen::MatrixXcd> generate_group_raw(const ScenarioConfig& cfg,
                                                 std::uint64_t split, std::int64_t index) {
  Rng rng(derive_seed(cfg.seed, split, static_cast<std::uint64_t>(index)));
  const PathSet paths = sample_paths(cfg, rng);
  std::vector<Eigen::MatrixXcd> frames;
  frames.reserve(cfg.group_len);
  for (int t = 0; t < cfg.group_len; ++t) {
    const ChannelFrame frame = channel_at(paths, t * cfg.feedback_interval_s, cfg);
    frames.push_back(truncate_delay(to_angular_delay(frame.h), cfg.n_delay_trunc));
  }
  return frames;
}

void minmax_update(const Eigen::MatrixXcd& m, double& lo, double& hi) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      lo = std::min({lo, m(r, c).real(), m(r, c).imag()});
      hi = std::max({hi, m(r, c).real(), m(r, c).imag()});
    }
  }
}

std::vector<ChannelGroup> build_split(const ScenarioConfig& cfg, std::uint64_t split, int count,
                                      std::int64_t id_base, const NormStats& stats,
                                      std::int64_t* clamp_count) {
  std::vector<ChannelGroup> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    ChannelGroup grp;
    grp.group_id = id_base + i;
    for (const auto& raw : generate_group_raw(cfg, split, i))
      grp.frames.push_back(normalize(raw, stats, clamp_count));
    out.push_back(std::move(grp));
  }
  return out;
}

void write_split(std::string& out, const std::vector<ChannelGroup>& split) {
  for (const auto& grp : split) {
    for (const auto& fr : grp.frames) {
      for (Eigen::Index r = 0; r < fr.re.rows(); ++r)
        for (Eigen::Index c = 0; c < fr.re.cols(); ++c)
          put_f32le(out, static_cast<float>(fr.re(r, c)));
      for (Eigen::Index r = 0; r < fr.im.rows(); ++r)
        for (Eigen::Index c = 0; c < fr.im.cols(); ++c)
          put_f32le(out, static_cast<float>(fr.im(r, c)));
    }
  }
}

std::vector<ChannelGroup> read_split(const unsigned char*& p, const unsigned char* end,
                                     const ScenarioConfig& cfg, int count, std::int64_t id_base,
                                     const NormStats& stats) {
  const int rows = cfg.n_delay_trunc;
  const int cols = cfg.n_tx;
  std::vector<ChannelGroup> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    ChannelGroup grp;
    grp.group_id = id_base + i;
    for (int t = 0; t < cfg.group_len; ++t) {
      AngularDelayFrame fr;
      fr.re.resize(rows, cols);
      fr.im.resize(rows, cols);
      fr.norm_offset = stats.offset;
      fr.norm_scale = stats.scale;
      const std::size_t need = static_cast<std::size_t>(rows) * cols * 2 * 4;
      if (static_cast<std::size_t>(end - p) < need)
        throw std::runtime_error("dataset: truncated payload");
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          fr.re(r, c) = get_f32le(p);
          p += 4;
        }
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          fr.im(r, c) = get_f32le(p);
          p += 4;
        }
      grp.frames.push_back(std::move(fr));
    }
    out.push_back(std::move(grp));
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd AngularDelayFrame::denormalize() const {
  Eigen::MatrixXcd out(re.rows(), re.cols());
  for (Eigen::Index r = 0; r < re.rows(); ++r)
    for (Eigen::Index c = 0; c < re.cols(); ++c)
      out(r, c) = std::complex<double>(re(r, c) * norm_scale + norm_offset,
                                       im(r, c) * norm_scale + norm_offset);
  return out;
}

AngularDelayFrame normalize(const Eigen::MatrixXcd& h_trunc, const NormStats& stats,
                            std::int64_t* clamp_count) {
  if (stats.scale == 0.0) throw std::invalid_argument("normalize: zero scale");
  AngularDelayFrame fr;
  fr.re.resize(h_trunc.rows(), h_trunc.cols());
  fr.im.resize(h_trunc.rows(), h_trunc.cols());
  fr.norm_offset = stats.offset;
  fr.norm_scale = stats.scale;
  auto squash = [&](double x) {
    double n = (x - stats.offset) / stats.scale;
    if (n < 0.0 || n > 1.0) {
      if (clamp_count) ++*clamp_count;
      n = std::clamp(n, 0.0, 1.0);
    }
    return n;
  };
  for (Eigen::Index r = 0; r < h_trunc.rows(); ++r)
    for (Eigen::Index c = 0; c < h_trunc.cols(); ++c) {
      fr.re(r, c) = squash(h_trunc(r, c).real());
      fr.im(r, c) = squash(h_trunc(r, c).imag());
    }
  return fr;
}

Dataset generate_dataset(const ScenarioConfig& config, const SplitCounts& counts) {
  config.validate();
  if (counts.train < 1 || counts.val < 1 || counts.test < 1)
    throw std::invalid_argument("generate_dataset: split counts must be >= 1");

  // pass 1: training-split range for the affine normalization
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < counts.train; ++i)
    for (const auto& raw : generate_group_raw(config, kTrain, i)) minmax_update(raw, lo, hi);
  if (!(hi > lo)) throw std::runtime_error("generate_dataset: degenerate value range");

  Dataset ds;
  ds.config = config;
  ds.stats = NormStats{lo, hi - lo};

  // pass 2: materialize splits (training clamps are impossible by
  // construction; val/test clamps are counted)
  std::int64_t train_clamps = 0;
  ds.train = build_split(config, kTrain, counts.train, 0, ds.stats, &train_clamps);
  std::int64_t id = counts.train;
  ds.clamp_warnings = 0;
  ds.val = build_split(config, kVal, counts.val, id, ds.stats, &ds.clamp_warnings);
  id += counts.val;
  ds.test = build_split(config, kTest, counts.test, id, ds.stats, &ds.clamp_warnings);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  KeyValueHeader h;
  h.set_i64("format_version", kFormatVersion);
  h.set_i64("n_subcarriers", ds.config.n_subcarriers);
  h.set_i64("n_tx", ds.config.n_tx);
  h.set_i64("n_delay_trunc", ds.config.n_delay_trunc);
  h.set_f64("bandwidth_hz", ds.config.bandwidth_hz);
  h.set_f64("f0_hz", ds.config.f0_hz);
  h.set_f64("ue_speed_mps", ds.config.ue_speed_mps);
  h.set_f64("feedback_interval_s", ds.config.feedback_interval_s);
  h.set_i64("group_len", ds.config.group_len);
  h.set_i64("n_paths", ds.config.n_paths);
  h.set_i64("seed", static_cast<std::int64_t>(ds.config.seed));
  h.set_i64("on_grid_delays", ds.config.on_grid_delays ? 1 : 0);
  h.set_f64("norm_offset", ds.stats.offset);
  h.set_f64("norm_scale", ds.stats.scale);
  h.set_i64("count_train", static_cast<std::int64_t>(ds.train.size()));
  h.set_i64("count_val", static_cast<std::int64_t>(ds.val.size()));
  h.set_i64("count_test", static_cast<std::int64_t>(ds.test.size()));
  h.set_i64("clamp_warnings", ds.clamp_warnings);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  h.emit(os);
  std::string payload;
  write_split(payload, ds.train);
  write_split(payload, ds.val);
  write_split(payload, ds.test);
  os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("save_dataset: write failed on " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  const KeyValueHeader h = KeyValueHeader::parse(is);
  if (h.get_i64("format_version") != kFormatVersion)
    throw std::runtime_error("load_dataset: unsupported format version " +
                             h.get("format_version"));
  Dataset ds;
  ds.config.n_subcarriers = static_cast<int>(h.get_i64("n_subcarriers"));
  ds.config.n_tx = static_cast<int>(h.get_i64("n_tx"));
  ds.config.n_delay_trunc = static_cast<int>(h.get_i64("n_delay_trunc"));
  ds.config.bandwidth_hz = h.get_f64("bandwidth_hz");
  ds.config.f0_hz = h.get_f64("f0_hz");
  ds.config.ue_speed_mps = h.get_f64("ue_speed_mps");
  ds.config.feedback_interval_s = h.get_f64("feedback_interval_s");
  ds.config.group_len = static_cast<int>(h.get_i64("group_len"));
  ds.config.n_paths = static_cast<int>(h.get_i64("n_paths"));
  ds.config.seed = static_cast<std::uint64_t>(h.get_i64("seed"));
  ds.config.on_grid_delays = h.get_i64("on_grid_delays") != 0;
  ds.stats.offset = h.get_f64("norm_offset");
  ds.stats.scale = h.get_f64("norm_scale");
  const int n_train = static_cast<int>(h.get_i64("count_train"));
  const int n_val = static_cast<int>(h.get_i64("count_val"));
  const int n_test = static_cast<int>(h.get_i64("count_test"));
  ds.clamp_warnings = h.get_i64("clamp_warnings");

  std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(rest.data());
  const auto* end = p + rest.size();
  ds.train = read_split(p, end, ds.config, n_train, 0, ds.stats);
  ds.val = read_split(p, end, ds.config, n_val, n_train, ds.stats);
  ds.test = read_split(p, end, ds.config, n_test, n_train + n_val, ds.stats);
  if (p != end) throw std::runtime_error("load_dataset: trailing bytes after payload");
  return ds;
}

}  // namespace csifb
