#include "derits/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "derits/error.hpp"
#include "derits/eval.hpp"

namespace derits::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
}

LossResult mse_loss(const RealSeries& pred, const RealSeries& target) {
  if (pred.length() != target.length() || pred.channels() != target.channels()) {
    throw Error(ErrorKind::kShape, "mse_loss: prediction is " + std::to_string(pred.length()) + "x" +
                                       std::to_string(pred.channels()) + ", target is " +
                                       std::to_string(target.length()) + "x" +
                                       std::to_string(target.channels()));
  }
  LossResult r{0.0, RealSeries(pred.length(), pred.channels())};
  const auto p = pred.values().flat();
  const auto t = target.values().flat();
  auto g = r.grad.values().flat();
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    r.loss += e * e;
    g[i] = 2.0 * e / n;
  }
  r.loss /= n;
  return r;
}

OptimizerState OptimizerState::for_params(const model::ModelParams& params) {
  OptimizerState s;
  for (const auto& ref : model::parameters(params)) {
    s.first.emplace_back(ref.value.size(), 0.0);
    s.second.emplace_back(ref.value.size(), 0.0);
  }
  return s;
}

void adam_step(model::ModelParams& params, OptimizerState& state, const TrainConfig& cfg) {
  auto refs = model::parameters(params);
  if (state.first.size() != refs.size() || state.second.size() != refs.size()) {
    throw Error(ErrorKind::kShape, "adam_step: optimizer state does not match parameters");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (state.first[i].size() != refs[i].value.size() || state.second[i].size() != refs[i].value.size()) {
      throw Error(ErrorKind::kShape, "adam_step: moment buffer shape mismatch for " + refs[i].name);
    }
    for (std::size_t j = 0; j < refs[i].grad.size(); ++j) {
      if (!std::isfinite(refs[i].grad[j])) {
        throw Error(ErrorKind::kNonFinite, "non-finite gradient in tensor '" + refs[i].name +
                                               "' at flat index " + std::to_string(j));
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    auto value = refs[i].value;
    const auto grad = refs[i].grad;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g;
      v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      value[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

double clip_grad_norm(model::ModelParams& params, double max_norm) {
  auto refs = model::parameters(params);
  double sq = 0.0;
  for (const auto& r : refs) {
    for (double g : r.grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& r : refs) {
      for (double& g : r.grad) g *= scale;
    }
  }
  return norm;
}

TrainResult train_loop(const data::Dataset& dataset, const model::ModelConfig& model_cfg,
                       const TrainConfig& train_cfg) {
  train_cfg.validate();
  model::ModelConfig cfg = model_cfg;
  cfg.channels = dataset.series.channels();
  TrainResult result;
  result.best = model::init_params(cfg);
  if (train_cfg.epochs == 0) return result;

  const auto train_windows = data::windows(dataset, data::Split::kTrain, cfg.lookback, cfg.horizon);
  const auto val_windows = data::windows(dataset, data::Split::kVal, cfg.lookback, cfg.horizon);
  if (train_windows.empty() || val_windows.empty()) {
    throw Error(ErrorKind::kConfig, "training needs non-empty train and validation windows (train: " +
                                        std::to_string(train_windows.size()) + ", val: " +
                                        std::to_string(val_windows.size()) + ")");
  }

  model::ModelParams params = result.best;
  OptimizerState state = OptimizerState::for_params(params);
  std::mt19937_64 rng(train_cfg.seed);
  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best_mae = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + train_cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      model::zero_grad(params);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& sample = train_windows[order[b]];
        auto [pred, cache] = model::model_forward(sample.x, params);
        auto [loss, grad] = mse_loss(pred, sample.y);
        loss_sum += loss;
        for (double& g : grad.values().flat()) g *= inv_batch;
        model::model_backward(params, cache, grad);
      }
      clip_grad_norm(params, train_cfg.grad_clip);
      adam_step(params, state, train_cfg);
    }

    const auto val = eval::evaluate(params, dataset, data::Split::kVal);
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(order.size()), val.mae, val.rmse});
    if (val.mae < best_mae) {
      best_mae = val.mae;
      result.best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (train_cfg.patience > 0 && ++stale >= train_cfg.patience) {
      break;
    }
  }
  model::zero_grad(result.best);
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << "epoch,train_loss,val_mae,val_rmse\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << data::format_real(r.train_loss) << ',' << data::format_real(r.val_mae)
        << ',' << data::format_real(r.val_rmse) << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing: " + path.string());
}

}  // namespace derits::train
