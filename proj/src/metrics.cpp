#include "csifb/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "csifb/serial.hpp"

namespace csifb {

double nmse_db_clamp(double linear) {
  if (linear <= 0.0) return -300.0;
  return std::max(10.0 * std::log10(linear), -300.0);
}

NmseResult nmse(const std::vector<FrameSeq>& truth, const std::vector<FrameSeq>& recon) {
  if (truth.size() != recon.size())
    throw std::invalid_argument("nmse: group count mismatch");
  NmseResult res;
  double acc = 0.0, acc_t1 = 0.0, acc_trest = 0.0;
  std::int64_t n_groups = 0, n_t1 = 0, n_trest_groups = 0;
  for (std::size_t gi = 0; gi < truth.size(); ++gi) {
    const auto& tg = truth[gi];
    const auto& rg = recon[gi];
    if (tg.size() != rg.size()) throw std::invalid_argument("nmse: frame count mismatch");
    if (tg.empty()) continue;
    double group_sum = 0.0, trest_sum = 0.0;
    int group_n = 0, trest_n = 0;
    for (std::size_t t = 0; t < tg.size(); ++t) {
      const Eigen::MatrixXcd ht = tg[t].denormalize();
      const Eigen::MatrixXcd hr = rg[t].denormalize();
      const double sig = ht.squaredNorm();
      if (sig == 0.0) {
        ++res.skipped_frames;
        continue;
      }
      const double ratio = (ht - hr).squaredNorm() / sig;
      group_sum += ratio;
      ++group_n;
      if (t == 0) {
        acc_t1 += ratio;
        ++n_t1;
      } else {
        trest_sum += ratio;
        ++trest_n;
      }
    }
    if (group_n == 0) continue;
    acc += group_sum / group_n;
    ++n_groups;
    if (trest_n > 0) {
      acc_trest += trest_sum / trest_n;
      ++n_trest_groups;
    }
  }
  if (n_groups == 0) throw std::invalid_argument("nmse: no scorable frames");
  res.lin = acc / n_groups;
  res.lin_t1 = n_t1 ? acc_t1 / n_t1 : 0.0;
  res.lin_trest = n_trest_groups ? acc_trest / n_trest_groups
                                 : std::numeric_limits<double>::quiet_NaN();
  res.db = nmse_db_clamp(res.lin);
  res.db_t1 = nmse_db_clamp(res.lin_t1);
  res.db_trest = std::isnan(res.lin_trest) ? std::numeric_limits<double>::quiet_NaN()
                                           : nmse_db_clamp(res.lin_trest);
  return res;
}

ChannelFrame reconstruct_spatial_freq(const AngularDelayFrame& fr, int n_subcarriers) {
  const int rows = static_cast<int>(fr.re.rows());
  const int cols = static_cast<int>(fr.re.cols());
  if (n_subcarriers < rows)
    throw std::invalid_argument("reconstruct_spatial_freq: N_c smaller than truncation");
  Eigen::MatrixXcd padded = Eigen::MatrixXcd::Zero(n_subcarriers, cols);
  padded.topRows(rows) = fr.denormalize();
  ChannelFrame out;
  out.h = from_angular_delay(padded);
  return out;
}

RhoResult rho(const std::vector<Eigen::MatrixXcd>& truth,
              const std::vector<Eigen::MatrixXcd>& recon) {
  if (truth.size() != recon.size()) throw std::invalid_argument("rho: frame count mismatch");
  if (truth.empty()) throw std::invalid_argument("rho: no frames");
  RhoResult res;
  double acc = 0.0;
  std::int64_t n = 0;
  for (std::size_t f = 0; f < truth.size(); ++f) {
    const auto& ht = truth[f];
    const auto& hr = recon[f];
    if (ht.rows() != hr.rows() || ht.cols() != hr.cols())
      throw std::invalid_argument("rho: frame shape mismatch");
    double frame_acc = 0.0;
    int frame_n = 0;
    for (Eigen::Index row = 0; row < ht.rows(); ++row) {
      const double nt = ht.row(row).norm();
      const double nr = hr.row(row).norm();
      if (nt == 0.0 || nr == 0.0) {
        ++res.skipped_terms;
        continue;
      }
      // Eigen's dot conjugates its left operand: this is recon^H truth
      frame_acc += std::abs(hr.row(row).dot(ht.row(row))) / (nr * nt);
      ++frame_n;
    }
    if (frame_n == 0) continue;
    acc += frame_acc / frame_n;
    ++n;
  }
  res.rho = n ? acc / n : 0.0;
  return res;
}

double runtime_benchmark(const std::function<void()>& run_all_frames, int n_frames,
                         int repeats) {
  if (repeats < 3) throw std::invalid_argument("runtime_benchmark: repeats must be >= 3");
  if (n_frames < 1) throw std::invalid_argument("runtime_benchmark: n_frames must be >= 1");
  run_all_frames();  // warm-up, untimed
  std::vector<double> times;
  times.reserve(repeats);
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    run_all_frames();
    const auto stop = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(stop - start).count());
  }
  std::sort(times.begin(), times.end());
  const double median =
      times.size() % 2
          ? times[times.size() / 2]
          : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
  return median / n_frames;
}

std::string cr_label(double cr) {
  if (cr > 0.0) {
    const double inv = 1.0 / cr;
    const double rounded = std::round(inv);
    if (std::fabs(inv - rounded) < 1e-9 && rounded >= 1.0)
      return "1/" + std::to_string(static_cast<long long>(rounded));
  }
  std::ostringstream os;
  os << cr;
  return os.str();
}

Report make_report(std::vector<EvalResult> results) {
  // CR-robustness: per method, degradation from the highest CR (most
  // measurements) to the lowest
  std::map<std::string, std::pair<const EvalResult*, const EvalResult*>> extremes;
  for (const auto& r : results) {
    auto& e = extremes[r.method];
    if (!e.first || r.cr > e.first->cr) e.first = &r;
    if (!e.second || r.cr < e.second->cr) e.second = &r;
  }
  for (auto& r : results) {
    const auto& e = extremes[r.method];
    if (e.first == e.second || e.first->cr == e.second->cr) {
      r.degradation_pct = 0.0;
    } else {
      const double ref = e.first->nmse_db;
      const double worst = e.second->nmse_db;
      r.degradation_pct = 100.0 * (worst - ref) / std::max(std::fabs(ref), 1e-12);
    }
  }

  Report rep;
  rep.results = results;

  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    j.push_back({{"method", r.method},
                 {"cr", r.cr},
                 {"nmse_db", r.nmse_db},
                 {"rho", r.rho},
                 {"runtime_s_per_frame", r.runtime_s_per_frame},
                 {"nmse_t1_db", r.nmse_t1_db},
                 {"nmse_trest_db", r.nmse_trest_db},
                 {"degradation_pct", r.degradation_pct}});
  }
  rep.json = j.dump(2);

  std::ostringstream tsv;
  tsv << "method\tcr\tnmse_db\trho\truntime_s_per_frame\tnmse_t1_db\tnmse_trest_db\t"
         "degradation_pct\n";
  for (const auto& r : results) {
    tsv << r.method << '\t' << f64_text(r.cr) << '\t' << f64_text(r.nmse_db) << '\t'
        << f64_text(r.rho) << '\t' << f64_text(r.runtime_s_per_frame) << '\t'
        << f64_text(r.nmse_t1_db) << '\t' << f64_text(r.nmse_trest_db) << '\t'
        << f64_text(r.degradation_pct) << '\n';
  }
  rep.tsv = tsv.str();

  std::ostringstream tab;
  tab << std::left << std::setw(14) << "method" << std::right << std::setw(8) << "CR"
      << std::setw(12) << "NMSE[dB]" << std::setw(8) << "rho" << std::setw(14) << "s/frame"
      << std::setw(12) << "t1[dB]" << std::setw(12) << "t2..T[dB]" << std::setw(10)
      << "deg[%]" << '\n';
  for (const auto& r : results) {
    tab << std::left << std::setw(14) << r.method << std::right << std::setw(8)
        << cr_label(r.cr) << std::fixed << std::setprecision(2) << std::setw(12) << r.nmse_db
        << std::setprecision(3) << std::setw(8) << r.rho << std::scientific
        << std::setprecision(2) << std::setw(14) << r.runtime_s_per_frame << std::fixed
        << std::setprecision(2) << std::setw(12) << r.nmse_t1_db << std::setw(12)
        << r.nmse_trest_db << std::setprecision(1) << std::setw(10) << r.degradation_pct
        << '\n';
    tab.unsetf(std::ios::floatfield);
  }
  rep.human_table = tab.str();
  return rep;
}

std::vector<EvalResult> parse_report_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  std::vector<EvalResult> out;
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  for (const auto& row : j) {
    EvalResult r;
    r.method = row.at("method").get<std::string>();
    r.cr = num(row.at("cr"));
    r.nmse_db = num(row.at("nmse_db"));
    r.rho = num(row.at("rho"));
    r.runtime_s_per_frame = num(row.at("runtime_s_per_frame"));
    r.nmse_t1_db = num(row.at("nmse_t1_db"));
    r.nmse_trest_db = num(row.at("nmse_trest_db"));
    r.degradation_pct = num(row.at("degradation_pct"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace csifb
