#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derits/series.hpp"

namespace derits::data {

struct LoadedCsv {
  RealSeries series;
  std::vector<std::string> channel_names;
  std::vector<std::string> timestamps;
};

/// Header row, then one row per timestep: timestamp string followed by numeric
/// channels. Errors name 1-based (line, column) positions counted in the file,
/// the timestamp being column 1.
LoadedCsv load_csv(const std::filesystem::path& path);

/// Writes `timestamp_header,names...` then one row per timestep with values at
/// 17 significant digits. When `timestamps` is empty the row index is used.
void write_csv(const std::filesystem::path& path, const RealSeries& series,
               const std::vector<std::string>& channel_names,
               const std::vector<std::string>& timestamps = {},
               const std::string& timestamp_header = "timestamp");

enum class Split { kTrain, kVal, kTest };

Split parse_split(const std::string& name);
std::string to_string(Split split);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at kStdFloor
};

inline constexpr double kStdFloor = 1e-8;

struct Dataset {
  RealSeries series;  // normalized
  std::vector<std::string> channel_names;
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  /// [begin, end) row range of a split.
  std::pair<std::size_t, std::size_t> bounds(Split split) const;
};

struct SplitResult {
  Dataset dataset;
  NormStats stats;
};

/// Chronological 7:2:1 split at floor(0.7 T) and floor(0.9 T), then per-channel
/// z-scoring with train-slice statistics. Requires T >= L + H + 10.
SplitResult split_normalize(const RealSeries& series, std::size_t lookback, std::size_t horizon,
                            std::vector<std::string> channel_names = {});

struct WindowSample {
  RealSeries x;  // [L x D], rows [t - L, t)
  RealSeries y;  // [H x D], rows [t, t + H)
  std::size_t origin = 0;  // t, as a row index into Dataset::series
};

/// Every stride-1 window that fits inside the split; empty if the split is
/// shorter than L + H.
std::vector<WindowSample> windows(const Dataset& dataset, Split split, std::size_t lookback,
                                  std::size_t horizon);

inline std::size_t window_count(std::size_t split_length, std::size_t lookback,
                                std::size_t horizon) {
  return split_length >= lookback + horizon ? split_length - lookback - horizon + 1 : 0;
}

/// Trend + sinusoid + gaussian noise:
///   x[t] = sum_i c_i (t/T)^i + a cos(2 pi phi t + b) + sigma * N(0, 1)
/// with i running from 1 over trend_coeffs.
struct SynthSpec {
  std::size_t length = 0;
  std::vector<double> trend_coeffs;
  double sin_amp = 0.0;
  double sin_freq = 0.0;   // cycles per timestep
  double sin_phase = 0.0;  // radians
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

RealSeries synth_nonstationary(const SynthSpec& spec);

/// Shortest round-trip-safe rendering used by every CSV writer (17 significant digits).
std::string format_real(double value);

}  // namespace derits::data
