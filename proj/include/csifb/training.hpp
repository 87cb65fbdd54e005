#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csifb/dataset.hpp"
#include "csifb/models.hpp"

namespace csifb {

struct TrainConfig {
  int batch_size = 50;  // groups per batch; a group never splits across batches
  int epochs_phase1 = 100;
  int epochs_phase2 = 50;
  double lr_phase1 = 1e-3;
  double lr_phase2 = 1e-4;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;     // epochs between checkpoint files; 0 = off
  int early_stop_patience = 0;  // epochs without val improvement; 0 = off
  int threads = 1;
  std::string checkpoint_dir;   // required for checkpoint_every > 0

  int total_epochs() const { return epochs_phase1 + epochs_phase2; }
};

/// Two-phase step schedule: lr_phase1 while epoch < epochs_phase1, then
/// lr_phase2.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string final_checkpoint;
};

/// History file: one line per epoch, "epoch train_loss val_loss lr
/// wall_time_s", space separated. Everything except wall_time_s is
/// deterministic for a fixed (dataset, config, seed).
void save_history(const TrainHistory& history, const std::string& path);
TrainHistory parse_history(const std::string& path);

/// Standalone CsiNet trained on individual frames (the T = 1 loss), used
/// both as a baseline and as the preload source for the composite.
std::pair<CsiNetParams, TrainHistory> train_csinet(const Dataset& ds, int m_codeword,
                                                   const TrainConfig& cfg);

/// End-to-end CsiNet-LSTM training on grouped data. When preload
/// checkpoints are given, encoder/decoder blocks start from them and only
/// the LSTM starts fresh.
std::pair<CsiNetLstmParams, TrainHistory> train_csinet_lstm(const Dataset& ds,
                                                            const ModelDims& dims,
                                                            const TrainConfig& cfg,
                                                            const CsiNetParams* preload_high,
                                                            const CsiNetParams* preload_low);

/// Mean per-frame loss of a standalone CsiNet over a split.
double csinet_eval_loss(const std::vector<ChannelGroup>& groups, CsiNetParams& params,
                        int threads);
/// Mean per-group loss of the composite over a split.
double csinet_lstm_eval_loss(const std::vector<ChannelGroup>& groups,
                             CsiNetLstmParams& params, int threads);

}  // namespace csifb
