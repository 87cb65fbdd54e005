#include "csifb/training.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "csifb/adam.hpp"
#include "csifb/checkpoint.hpp"
#include "csifb/serial.hpp"

namespace csifb {

namespace {

// Fixed wave width for batch-parallel evaluation. Samples are computed in
// independent per-sample graphs, then reduced in sample order, so results
// are bit-identical for every thread count.
constexpr int kWave = 4;

using SampleLossFn = std::function<VarId(Graph&, int group_index)>;

void run_parallel(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Sum of per-sample losses over `samples`; gradients (when requested)
/// are accumulated into the bound parameters in sample order.
double run_samples(const std::vector<int>& samples, int threads, const SampleLossFn& build,
                   bool with_grad) {
  double loss_sum = 0.0;
  std::array<std::unique_ptr<Graph>, kWave> graphs;
  std::array<VarId, kWave> losses{};
  for (std::size_t w0 = 0; w0 < samples.size(); w0 += kWave) {
    const int wn = static_cast<int>(std::min<std::size_t>(kWave, samples.size() - w0));
    run_parallel(wn, threads, [&](int k) {
      graphs[k] = std::make_unique<Graph>();
      losses[k] = build(*graphs[k], samples[w0 + k]);
      if (with_grad) graphs[k]->backward(losses[k], /*sink_params=*/false);
    });
    for (int k = 0; k < wn; ++k) {
      loss_sum += graphs[k]->value(losses[k]).v[0];
      if (with_grad) graphs[k]->sink_param_grads();
      graphs[k].reset();
    }
  }
  return loss_sum;
}

struct LoopHooks {
  std::function<void(const std::string&)> save_checkpoint;  // path stem -> file
  std::function<double()> val_loss;
};

/// Shared epoch loop: group-atomic shuffling, two-phase learning rate,
/// divergence abort, per-epoch trainer-vs-graph loss cross-check.
TrainHistory train_loop(const TrainConfig& cfg, int n_groups, double sample_denom_per_group,
                        const SampleLossFn& build, std::vector<Tensor*> params,
                        const LoopHooks& hooks) {
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.lr_phase1 <= 0.0 || cfg.lr_phase2 <= 0.0)
    throw std::invalid_argument("train: learning rates must be positive");
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_dir.empty())
    throw std::invalid_argument("train: checkpoint_every needs a checkpoint_dir");

  AdamState adam(params);
  Rng shuffle_rng(derive_seed(cfg.seed, 0xBA7C4));
  std::vector<int> order(n_groups);
  for (int i = 0; i < n_groups; ++i) order[i] = i;

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
    const auto t_start = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg);
    deterministic_shuffle(order, shuffle_rng);

    double epoch_loss_sum = 0.0;
    double epoch_denom = 0.0;
    for (int b0 = 0; b0 < n_groups; b0 += cfg.batch_size) {
      const int bn = std::min(cfg.batch_size, n_groups - b0);
      std::vector<int> batch(order.begin() + b0, order.begin() + b0 + bn);

      for (Tensor* p : params) p->zero_grad();
      const double batch_loss_sum = run_samples(batch, cfg.threads, build, true);
      const double denom = sample_denom_per_group * bn;
      const double batch_loss = batch_loss_sum / denom;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 "; last good checkpoint is the previous epoch's");

      if (b0 == 0) {
        // one batch per epoch is recomputed through the graph-level MSE
        // scaling; the trainer's bookkeeping must agree with it
        double check = 0.0;
        for (int gi : batch) {
          Graph g;
          check += g.value(g.scale(build(g, gi), 1.0 / denom)).v[0];
        }
        if (std::fabs(check - batch_loss) > 1e-9 * std::max(1.0, std::fabs(batch_loss)))
          throw std::runtime_error("train: trainer loss " + std::to_string(batch_loss) +
                                   " disagrees with graph MSE " + std::to_string(check));
      }

      double grad_sq = 0.0;
      for (Tensor* p : params)
        for (auto& g : p->g) {
          g /= denom;
          grad_sq += g * g;
        }
      if (!std::isfinite(grad_sq))
        throw std::runtime_error("train: non-finite gradient at epoch " +
                                 std::to_string(epoch));
      adam.step(lr);

      epoch_loss_sum += batch_loss_sum;
      epoch_denom += denom;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss_sum / epoch_denom;
    rec.val_loss = hooks.val_loss ? hooks.val_loss() : 0.0;
    rec.lr = lr;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    history.epochs.push_back(rec);

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      hooks.save_checkpoint(cfg.checkpoint_dir + "/ckpt_epoch_" + std::to_string(epoch));

    if (cfg.early_stop_patience > 0) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }
  return history;
}

}  // namespace

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  return epoch < cfg.epochs_phase1 ? cfg.lr_phase1 : cfg.lr_phase2;
}

void save_history(const TrainHistory& history, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_history: cannot open " + path);
  os << "epoch train_loss val_loss lr wall_time_s\n";
  for (const auto& e : history.epochs)
    os << e.epoch << ' ' << f64_text(e.train_loss) << ' ' << f64_text(e.val_loss) << ' '
       << f64_text(e.lr) << ' ' << f64_text(e.wall_time_s) << '\n';
}

TrainHistory parse_history(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("parse_history: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("parse_history: empty file");
  TrainHistory h;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpochRecord e;
    if (!(ls >> e.epoch >> e.train_loss >> e.val_loss >> e.lr >> e.wall_time_s))
      throw std::runtime_error("parse_history: malformed line '" + line + "'");
    h.epochs.push_back(e);
  }
  return h;
}

double csinet_eval_loss(const std::vector<ChannelGroup>& groups, CsiNetParams& params,
                        int threads) {
  if (groups.empty()) throw std::invalid_argument("csinet_eval_loss: empty split");
  std::vector<int> all(groups.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  std::size_t n_frames = 0;
  for (const auto& g : groups) n_frames += g.frames.size();
  const double sum = run_samples(
      all, threads,
      [&](Graph& g, int gi) {
        CsiNetNet net(g, params);
        VarId loss = g.input({1}, {0.0});
        for (const auto& fr : groups[gi].frames) {
          const Tensor target = frame_to_tensor(fr);
          const VarId out = net.decode(net.encode(g.input(target)));
          loss = g.add(loss, g.sq_diff_sum(out, target));
        }
        return loss;
      },
      false);
  return sum / static_cast<double>(n_frames);
}

double csinet_lstm_eval_loss(const std::vector<ChannelGroup>& groups,
                             CsiNetLstmParams& params, int threads) {
  if (groups.empty()) throw std::invalid_argument("csinet_lstm_eval_loss: empty split");
  std::vector<int> all(groups.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const double sum = run_samples(
      all, threads,
      [&](Graph& g, int gi) {
        CsiNetNet high(g, params.high);
        CsiNetNet low(g, params.low);
        LstmStackNet lstm(g, params.lstm);
        const auto& frames = groups[gi].frames;
        const VarId s1 = high.encode(g.input(frame_to_tensor(frames[0])));
        std::vector<VarId> dec_outs{high.decode(s1)};
        for (std::size_t t = 1; t < frames.size(); ++t) {
          const VarId st = low.encode(g.input(frame_to_tensor(frames[t])));
          dec_outs.push_back(low.decode(g.concat(s1, st)));
        }
        LstmStackNet::State state = lstm.zero_state();
        VarId loss = g.input({1}, {0.0});
        for (std::size_t t = 0; t < frames.size(); ++t) {
          const VarId out = lstm.step(g.flatten(dec_outs[t]), state);
          Tensor target = frame_to_tensor(frames[t]);
          target.shape = {static_cast<int>(target.size())};
          loss = g.add(loss, g.sq_diff_sum(out, target));
        }
        return loss;
      },
      false);
  return sum / static_cast<double>(groups.size());
}

std::pair<CsiNetParams, TrainHistory> train_csinet(const Dataset& ds, int m_codeword,
                                                   const TrainConfig& cfg) {
  if (ds.train.empty()) throw std::invalid_argument("train_csinet: empty training split");
  const int n_delay = ds.config.n_delay_trunc;
  const int n_tx = ds.config.n_tx;
  Rng init_rng(derive_seed(cfg.seed, 0xC51));
  CsiNetParams params = init_csinet(n_delay, n_tx, m_codeword, m_codeword, init_rng);

  const int frames_per_group = ds.config.group_len;
  const SampleLossFn build = [&](Graph& g, int gi) {
    CsiNetNet net(g, params);
    VarId loss = g.input({1}, {0.0});
    for (const auto& fr : ds.train[gi].frames) {
      const Tensor target = frame_to_tensor(fr);
      const VarId out = net.decode(net.encode(g.input(target)));
      loss = g.add(loss, g.sq_diff_sum(out, target));
    }
    return loss;
  };

  LoopHooks hooks;
  hooks.val_loss = [&] { return csinet_eval_loss(ds.val, params, cfg.threads); };
  hooks.save_checkpoint = [&](const std::string& stem) {
    save_csinet(params, stem + ".csinet");
  };

  TrainHistory history = train_loop(cfg, static_cast<int>(ds.train.size()),
                                    static_cast<double>(frames_per_group), build,
                                    params.all(), hooks);
  if (!cfg.checkpoint_dir.empty()) {
    history.final_checkpoint = cfg.checkpoint_dir + "/final.csinet";
    save_csinet(params, history.final_checkpoint);
  }
  return {std::move(params), std::move(history)};
}

std::pair<CsiNetLstmParams, TrainHistory> train_csinet_lstm(const Dataset& ds,
                                                            const ModelDims& dims,
                                                            const TrainConfig& cfg,
                                                            const CsiNetParams* preload_high,
                                                            const CsiNetParams* preload_low) {
  if (ds.train.empty()) throw std::invalid_argument("train_csinet_lstm: empty training split");
  if (dims.n_delay != ds.config.n_delay_trunc || dims.n_tx != ds.config.n_tx)
    throw std::invalid_argument("train_csinet_lstm: dims do not match dataset");
  if ((preload_high == nullptr) != (preload_low == nullptr))
    throw std::invalid_argument("train_csinet_lstm: preload needs both checkpoints");

  Rng init_rng(derive_seed(cfg.seed, 0xC51A));
  CsiNetLstmParams params = init_csinet_lstm(dims, init_rng);
  if (preload_high) preload_from_csinet(params, *preload_high, *preload_low);

  const SampleLossFn build = [&](Graph& g, int gi) {
    CsiNetNet high(g, params.high);
    CsiNetNet low(g, params.low);
    LstmStackNet lstm(g, params.lstm);
    const auto& frames = ds.train[gi].frames;
    const VarId s1 = high.encode(g.input(frame_to_tensor(frames[0])));
    std::vector<VarId> dec_outs{high.decode(s1)};
    for (std::size_t t = 1; t < frames.size(); ++t) {
      const VarId st = low.encode(g.input(frame_to_tensor(frames[t])));
      dec_outs.push_back(low.decode(g.concat(s1, st)));
    }
    LstmStackNet::State state = lstm.zero_state();
    VarId loss = g.input({1}, {0.0});
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const VarId out = lstm.step(g.flatten(dec_outs[t]), state);
      Tensor target = frame_to_tensor(frames[t]);
      target.shape = {static_cast<int>(target.size())};
      loss = g.add(loss, g.sq_diff_sum(out, target));
    }
    return loss;
  };

  LoopHooks hooks;
  hooks.val_loss = [&] { return csinet_lstm_eval_loss(ds.val, params, cfg.threads); };
  hooks.save_checkpoint = [&](const std::string& stem) {
    save_csinet_lstm(params, stem + ".csinet_lstm");
  };

  TrainHistory history = train_loop(cfg, static_cast<int>(ds.train.size()), 1.0, build,
                                    params.all(), hooks);
  if (!cfg.checkpoint_dir.empty()) {
    history.final_checkpoint = cfg.checkpoint_dir + "/final.csinet_lstm";
    save_csinet_lstm(params, history.final_checkpoint);
  }
  return {std::move(params), std::move(history)};
}

}  // namespace csifb
