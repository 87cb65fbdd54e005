#include "csifb/evaluate.hpp"

#include <stdexcept>

#include "csifb/rng.hpp"

namespace csifb {

namespace {

std::vector<FrameSeq> truth_slice(const Dataset& ds, int max_groups) {
  const int n = max_groups > 0 ? std::min<int>(max_groups, static_cast<int>(ds.test.size()))
                               : static_cast<int>(ds.test.size());
  if (n == 0) throw std::invalid_argument("evaluate: empty test split");
  std::vector<FrameSeq> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(ds.test[i].frames);
  return out;
}

/// NMSE on the angular-delay matrices plus rho after spatial-frequency
/// reconstruction, shared by every method.
EvalResult score(const Dataset& ds, const std::string& method, double cr,
                 const std::vector<FrameSeq>& truth, const std::vector<FrameSeq>& recon) {
  EvalResult r;
  r.method = method;
  r.cr = cr;
  const NmseResult nm = nmse(truth, recon);
  r.nmse_db = nm.db;
  r.nmse_t1_db = nm.db_t1;
  r.nmse_trest_db = nm.db_trest;

  std::vector<Eigen::MatrixXcd> truth_sf, recon_sf;
  for (std::size_t g = 0; g < truth.size(); ++g)
    for (std::size_t t = 0; t < truth[g].size(); ++t) {
      truth_sf.push_back(reconstruct_spatial_freq(truth[g][t], ds.config.n_subcarriers).h);
      recon_sf.push_back(reconstruct_spatial_freq(recon[g][t], ds.config.n_subcarriers).h);
    }
  r.rho = rho(truth_sf, recon_sf).rho;
  return r;
}

}  // namespace

std::string baseline_name(RecoveryAlgorithm alg) {
  switch (alg) {
    case RecoveryAlgorithm::kLassoIsta:
      return "lasso-ista";
    case RecoveryAlgorithm::kLassoFista:
      return "lasso";
    case RecoveryAlgorithm::kTvProxGrad:
      return "tv";
    case RecoveryAlgorithm::kAmp:
      return "amp";
  }
  return "?";
}

SensingMatrix sensing_for(const Dataset& ds, double cr) {
  const int n = ds.config.n_delay_trunc * ds.config.n_tx;
  const int m = codeword_len(2 * n, cr);
  return make_sensing_matrix(m, n, derive_seed(ds.config.seed, 0xF1, m));
}

RecoveryConfig default_recovery_config(RecoveryAlgorithm alg, const Dataset& ds) {
  RecoveryConfig cfg;
  cfg.algorithm = alg;
  cfg.tv_rows = ds.config.n_delay_trunc;
  cfg.tv_cols = ds.config.n_tx;
  switch (alg) {
    case RecoveryAlgorithm::kLassoIsta:
    case RecoveryAlgorithm::kLassoFista:
      cfg.max_iters = 2000;
      cfg.tol = 1e-7;
      break;
    case RecoveryAlgorithm::kTvProxGrad:
      cfg.max_iters = 500;
      cfg.tol = 1e-7;
      break;
    case RecoveryAlgorithm::kAmp:
      cfg.max_iters = 100;
      cfg.tol = 1e-7;
      break;
  }
  return cfg;
}

EvalResult evaluate_csinet(const Dataset& ds, CsiNetParams& params, const EvalOptions& opts) {
  if (params.n_delay != ds.config.n_delay_trunc || params.n_tx != ds.config.n_tx)
    throw std::invalid_argument("evaluate_csinet: checkpoint is " +
                                std::to_string(params.n_delay) + "x" +
                                std::to_string(params.n_tx) + ", dataset is " +
                                std::to_string(ds.config.n_delay_trunc) + "x" +
                                std::to_string(ds.config.n_tx));
  const auto truth = truth_slice(ds, opts.max_groups);
  const NormStats stats{ds.stats.offset, ds.stats.scale};

  std::vector<FrameSeq> recon;
  recon.reserve(truth.size());
  for (const auto& grp : truth) {
    FrameSeq rec;
    for (const auto& fr : grp) {
      const Tensor out = csinet_decode(csinet_encode(fr, params), params);
      rec.push_back(tensor_to_frame(out, stats));
    }
    recon.push_back(std::move(rec));
  }

  const double cr = static_cast<double>(params.m_codeword) / (2 * params.n_delay * params.n_tx);
  EvalResult r = score(ds, "csinet", cr, truth, recon);
  if (opts.with_runtime) {
    const int nf = std::min<int>(opts.runtime_frames, static_cast<int>(truth[0].size()));
    r.runtime_s_per_frame = runtime_benchmark(
        [&] {
          for (int i = 0; i < nf; ++i)
            csinet_decode(csinet_encode(truth[0][i % truth[0].size()], params), params);
        },
        nf, opts.runtime_repeats);
  }
  return r;
}

EvalResult evaluate_csinet_lstm(const Dataset& ds, CsiNetLstmParams& params,
                                const EvalOptions& opts) {
  if (params.dims.n_delay != ds.config.n_delay_trunc || params.dims.n_tx != ds.config.n_tx)
    throw std::invalid_argument("evaluate_csinet_lstm: checkpoint dims do not match dataset");
  const auto truth = truth_slice(ds, opts.max_groups);
  const NormStats stats{ds.stats.offset, ds.stats.scale};

  std::vector<FrameSeq> recon;
  recon.reserve(truth.size());
  for (std::size_t g = 0; g < truth.size(); ++g) {
    ChannelGroup grp;
    grp.frames = truth[g];
    const std::vector<Tensor> outs = csinet_lstm_forward(grp, params);
    FrameSeq rec;
    for (const auto& t : outs) rec.push_back(tensor_to_frame(t, stats));
    recon.push_back(std::move(rec));
  }

  const double cr = static_cast<double>(params.dims.m_low) / params.dims.n2();
  EvalResult r = score(ds, "csinet-lstm", cr, truth, recon);
  if (opts.with_runtime) {
    ChannelGroup grp;
    grp.frames = truth[0];
    const int nf = static_cast<int>(grp.frames.size());
    r.runtime_s_per_frame = runtime_benchmark(
        [&] { csinet_lstm_forward(grp, params); }, nf, opts.runtime_repeats);
  }
  return r;
}

EvalResult evaluate_baseline(const Dataset& ds, RecoveryAlgorithm alg, double cr,
                             const EvalOptions& opts, int max_iters) {
  const auto truth = truth_slice(ds, opts.max_groups);
  const NormStats stats{ds.stats.offset, ds.stats.scale};
  const SensingMatrix phi = sensing_for(ds, cr);

  RecoveryConfig cfg = default_recovery_config(alg, ds);
  if (max_iters > 0) cfg.max_iters = max_iters;
  cfg.lambda = tune_lambda(ds.val, phi, cfg, stats, {1e-4, 1e-3, 1e-2, 1e-1});

  std::vector<FrameSeq> recon;
  recon.reserve(truth.size());
  for (const auto& grp : truth) {
    ChannelGroup g;
    g.frames = grp;
    const BaselineGroupResult res = baseline_recover_group(g, phi, cfg, stats);
    FrameSeq rec;
    for (const auto& fr : res.frames) rec.push_back(fr.recovered);
    recon.push_back(std::move(rec));
  }

  EvalResult r = score(ds, baseline_name(alg), cr, truth, recon);
  if (opts.with_runtime) {
    ChannelGroup g;
    g.frames = truth[0];
    const int nf = static_cast<int>(g.frames.size());
    r.runtime_s_per_frame = runtime_benchmark(
        [&] { baseline_recover_group(g, phi, cfg, stats); }, nf, opts.runtime_repeats);
  }
  return r;
}

}  // namespace csifb
