#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "derits/data.hpp"
#include "derits/model.hpp"
#include "derits/series.hpp"

namespace derits::train {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  std::size_t patience = 10;  // epochs without val MAE improvement; 0 disables early stop
  std::uint64_t seed = 0;     // mini-batch shuffling

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  RealSeries grad;  // d loss / d pred
};

/// Mean squared error and its gradient 2 (pred - target) / count.
LossResult mse_loss(const RealSeries& pred, const RealSeries& target);

/// Adam moments, one buffer pair per tensor in model::parameters() order.
struct OptimizerState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::uint64_t step = 0;

  static OptimizerState for_params(const model::ModelParams& params);
};

/// Bias-corrected Adam update from the gradient buffers in `params`.
/// Throws kNonFinite, naming the tensor, before touching any value if a
/// gradient entry is NaN or infinite.
void adam_step(model::ModelParams& params, OptimizerState& state, const TrainConfig& cfg);

/// Scales all gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(model::ModelParams& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_mae = 0.0;
  double val_rmse = 0.0;
};

struct TrainResult {
  model::ModelParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

TrainResult train_loop(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                       const TrainConfig& train_cfg);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace derits::train
