#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "derits/checkpoint.hpp"
#include "derits/eval.hpp"
#include "derits/spectral.hpp"

namespace derits::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kSyntheticKeys = {"trend_coeffs", "sin_amp",   "sin_freq",
                                                 "sin_phase",    "noise_std", "length"};

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "' has an invalid value: " + j.dump());
  }
}

template <typename T>
T get_unsigned(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "' must be a non-negative integer");
  }
  return get_as<T>(j, key);
}

/// Flags collected by CLI11; unset optionals leave the config file value alone.
struct Flags {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> checkpoint;
  std::optional<unsigned> order;
  std::string split = "test";
  std::optional<std::string> input;
  std::optional<unsigned> ablation_order;
  std::size_t seg_len = 1;
  std::size_t gap = 0;
  bool baseline = false;
};

RunConfig resolve(const Flags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig{} : load_config(flags.config_path);
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.seed) {
    cfg.model.seed = *flags.seed;
    cfg.train.seed = *flags.seed;
    if (cfg.synthetic) cfg.synthetic->seed = *flags.seed;
  }
  if (flags.checkpoint) cfg.checkpoint = *flags.checkpoint;
  if (flags.ablation_order) cfg.model.ablation_order = *flags.ablation_order;
  return cfg;
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "cannot create output directory " + dir.string());
  }
}

fs::path checkpoint_path(const RunConfig& cfg) {
  return cfg.checkpoint ? *cfg.checkpoint : cfg.out_dir / "model.ckpt";
}

data::LoadedCsv load_source(const RunConfig& cfg, const std::optional<std::string>& input) {
  if (input) return data::load_csv(*input);
  if (cfg.csv_path) return data::load_csv(*cfg.csv_path);
  if (cfg.synthetic) {
    data::LoadedCsv loaded;
    loaded.series = data::synth_nonstationary(*cfg.synthetic);
    loaded.channel_names = {"value"};
    return loaded;
  }
  throw Error(ErrorKind::kConfig, "no data source: set csv_path or the synthetic keys");
}

std::string fmt(double v) { return data::format_real(v); }

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto source = load_source(cfg, std::nullopt);
  auto [dataset, stats] = data::split_normalize(source.series, cfg.model.lookback,
                                                cfg.model.horizon, source.channel_names);
  const auto result = train::train_loop(dataset, cfg.model, cfg.train);
  ensure_out_dir(cfg.out_dir);
  const fs::path ckpt = checkpoint_path(cfg);
  model::save_checkpoint(ckpt, result.best);
  train::write_history_csv(cfg.out_dir / "history.csv", result.history);

  out << "epochs run: " << result.history.size() << ", best epoch: " << result.best_epoch << '\n';
  if (result.best_epoch > 0) {
    const auto& best = result.history[result.best_epoch - 1];
    out << "val MAE " << fmt(best.val_mae) << "  val RMSE " << fmt(best.val_rmse) << '\n';
  }
  out << "checkpoint: " << ckpt.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const auto split = data::parse_split(flags.split);
  const auto params = model::load_checkpoint(checkpoint_path(cfg));
  const auto source = load_source(cfg, flags.input);
  const auto& mc = params.config;
  if (source.series.channels() != mc.channels) {
    throw Error(ErrorKind::kCompatibility,
                "checkpoint was trained on " + std::to_string(mc.channels) +
                    " channels, data has " + std::to_string(source.series.channels()));
  }
  auto [dataset, stats] =
      data::split_normalize(source.series, mc.lookback, mc.horizon, source.channel_names);
  const auto report = eval::evaluate(params, dataset, split);

  ensure_out_dir(cfg.out_dir);
  const std::string stem = "eval_" + data::to_string(split);
  eval::write_report_csv(cfg.out_dir / (stem + ".csv"), report, split, flags.baseline);
  eval::write_per_horizon_csv(cfg.out_dir / (stem + "_per_horizon.csv"), report);
  out << data::to_string(split) << " MAE " << fmt(report.mae) << "  RMSE " << fmt(report.rmse);
  if (flags.baseline) out << "  repeat-last MAE " << fmt(report.baseline_mae);
  out << "  (" << report.sample_count << " windows)\n";
  return kExitOk;
}

int cmd_transform(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const unsigned order = flags.order.value_or(1);
  const auto source = load_source(cfg, flags.input);
  const RealSeries image = spectral::derived_image(source.series, order);
  ensure_out_dir(cfg.out_dir);
  const fs::path path = cfg.out_dir / ("derived_k" + std::to_string(order) + ".csv");
  data::write_csv(path, image, source.channel_names, source.timestamps);
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_diagnose(const RunConfig& cfg, const Flags& flags, std::ostream& out) {
  const unsigned max_order = flags.order.value_or(3);
  const auto source = load_source(cfg, flags.input);
  const auto rows = eval::derived_shift_report(source.series, max_order, flags.seg_len, flags.gap);
  ensure_out_dir(cfg.out_dir);
  const fs::path path = cfg.out_dir / "shift_report.csv";
  eval::write_shift_report_csv(path, rows);
  out << "order  shift\n";
  for (const auto& r : rows) out << std::setw(5) << r.order << "  " << fmt(r.shift) << '\n';
  return kExitOk;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.synthetic) throw Error(ErrorKind::kConfig, "generate needs the synthetic keys (length, ...)");
  if (cfg.synthetic->length < 2) throw Error(ErrorKind::kConfig, "synthetic length must be >= 2");
  const RealSeries series = data::synth_nonstationary(*cfg.synthetic);
  ensure_out_dir(cfg.out_dir);
  const fs::path path = cfg.out_dir / "synthetic.csv";
  data::write_csv(path, series, {"value"});
  out << "wrote " << path.string() << " (" << series.length() << " rows)\n";
  return kExitOk;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "csv_path",   "lookback",      "horizon",    "branches",   "fusion_hidden",
      "ablation_order", "epochs",    "batch_size", "learning_rate", "adam_beta1",
      "adam_beta2", "adam_eps",      "grad_clip",  "patience",   "seed",
      "out_dir",    "checkpoint",    "trend_coeffs", "sin_amp",  "sin_freq",
      "sin_phase",  "noise_std",     "length"};
  return keys;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "config must be a JSON object");

  const auto& keys = known_config_keys();
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw Error(ErrorKind::kConfig, "unknown config key(s): " + list);
  }

  RunConfig cfg;
  auto has = [&](const char* k) { return j.contains(k); };
  if (has("csv_path")) cfg.csv_path = get_as<std::string>(j["csv_path"], "csv_path");
  if (has("lookback")) cfg.model.lookback = get_unsigned<std::size_t>(j["lookback"], "lookback");
  if (has("horizon")) cfg.model.horizon = get_unsigned<std::size_t>(j["horizon"], "horizon");
  if (has("branches")) cfg.model.branches = get_unsigned<unsigned>(j["branches"], "branches");
  if (has("fusion_hidden")) {
    cfg.model.fusion_hidden = get_unsigned<std::size_t>(j["fusion_hidden"], "fusion_hidden");
  }
  if (has("ablation_order") && !j["ablation_order"].is_null()) {
    cfg.model.ablation_order = get_unsigned<unsigned>(j["ablation_order"], "ablation_order");
  }
  if (has("epochs")) cfg.train.epochs = get_unsigned<std::size_t>(j["epochs"], "epochs");
  if (has("batch_size")) cfg.train.batch_size = get_unsigned<std::size_t>(j["batch_size"], "batch_size");
  if (has("learning_rate")) cfg.train.learning_rate = get_as<double>(j["learning_rate"], "learning_rate");
  if (has("adam_beta1")) cfg.train.adam_beta1 = get_as<double>(j["adam_beta1"], "adam_beta1");
  if (has("adam_beta2")) cfg.train.adam_beta2 = get_as<double>(j["adam_beta2"], "adam_beta2");
  if (has("adam_eps")) cfg.train.adam_eps = get_as<double>(j["adam_eps"], "adam_eps");
  if (has("grad_clip")) cfg.train.grad_clip = get_as<double>(j["grad_clip"], "grad_clip");
  if (has("patience")) cfg.train.patience = get_unsigned<std::size_t>(j["patience"], "patience");
  if (has("seed")) {
    const auto seed = get_unsigned<std::uint64_t>(j["seed"], "seed");
    cfg.model.seed = seed;
    cfg.train.seed = seed;
  }
  if (has("out_dir")) cfg.out_dir = get_as<std::string>(j["out_dir"], "out_dir");
  if (has("checkpoint")) cfg.checkpoint = get_as<std::string>(j["checkpoint"], "checkpoint");

  if (std::any_of(kSyntheticKeys.begin(), kSyntheticKeys.end(), [&](const auto& k) { return has(k.c_str()); })) {
    data::SynthSpec s;
    s.seed = cfg.model.seed;
    if (has("length")) s.length = get_unsigned<std::size_t>(j["length"], "length");
    if (has("trend_coeffs")) s.trend_coeffs = get_as<std::vector<double>>(j["trend_coeffs"], "trend_coeffs");
    if (has("sin_amp")) s.sin_amp = get_as<double>(j["sin_amp"], "sin_amp");
    if (has("sin_freq")) s.sin_freq = get_as<double>(j["sin_freq"], "sin_freq");
    if (has("sin_phase")) s.sin_phase = get_as<double>(j["sin_phase"], "sin_phase");
    if (has("noise_std")) s.noise_std = get_as<double>(j["noise_std"], "noise_std");
    cfg.synthetic = s;
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kIo:
    case ErrorKind::kCompatibility:
      return kExitConfig;
    case ErrorKind::kParse:
    case ErrorKind::kFormat:
      return kExitFormat;
    default:
      return kExitRuntime;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frequency derivative forecasting: train, evaluate and inspect derived signals"};
  app.require_subcommand(1);
  Flags flags;

  auto common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "JSON config file");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "seed for init, shuffling and synthesis");
    sub->add_option("--checkpoint", flags.checkpoint, "checkpoint path");
    sub->add_option("--order", flags.order, "derivative order (max order for diagnose)");
    sub->add_option("--split", flags.split, "train, val or test")
        ->check(CLI::IsMember({"train", "val", "test"}));
  };
  auto* train_cmd = app.add_subcommand("train", "train a model and save the best checkpoint");
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a split");
  auto* transform_cmd = app.add_subcommand("transform", "write the k-th order derived signal");
  auto* diagnose_cmd = app.add_subcommand("diagnose", "segment-mean shift of derived signals");
  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic trend + sinusoid series");
  for (auto* sub : {train_cmd, eval_cmd, transform_cmd, diagnose_cmd, generate_cmd}) common(sub);
  train_cmd->add_option("--ablation-order", flags.ablation_order,
                        "single branch of this order (0 allowed) instead of orders 1..K");
  eval_cmd->add_flag("--baseline", flags.baseline, "also report the repeat-last baseline");
  for (auto* sub : {eval_cmd, transform_cmd, diagnose_cmd}) {
    sub->add_option("--input", flags.input, "input CSV (defaults to csv_path)");
  }
  diagnose_cmd->add_option("--seg-len", flags.seg_len, "segment length")->check(CLI::PositiveNumber);
  diagnose_cmd->add_option("--gap", flags.gap, "rows between compared segments");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitConfig;
  }

  try {
    const RunConfig cfg = resolve(flags);
    if (*train_cmd) return cmd_train(cfg, out);
    if (*eval_cmd) return cmd_evaluate(cfg, flags, out);
    if (*transform_cmd) return cmd_transform(cfg, flags, out);
    if (*diagnose_cmd) return cmd_diagnose(cfg, flags, out);
    if (*generate_cmd) return cmd_generate(cfg, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace derits::cli
