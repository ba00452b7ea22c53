#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "derits/data.hpp"
#include "derits/model.hpp"
#include "derits/series.hpp"

namespace derits::eval {

struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::vector<double> per_horizon_mae;  // [H]
  double baseline_mae = 0.0;            // repeat-last forecaster on the same windows
  std::size_t sample_count = 0;
};

/// Forecast metrics over all windows of a split, on the normalized scale.
EvalReport evaluate(const model::ModelParams& params, const data::Dataset& dataset,
                    data::Split split);

/// Metrics for precomputed predictions; `predictions[i]` pairs with `samples[i]`.
EvalReport score(const std::vector<RealSeries>& predictions,
                 const std::vector<data::WindowSample>& samples);

/// Every horizon row equals the last lookback row.
RealSeries baseline_repeat_last(const RealSeries& x, std::size_t horizon);

/// Mean over t of |mean(x[t-seg+1 .. t]) - mean(x[t+gap+1 .. t+gap+seg])|,
/// averaged across channels. Requires length >= 2 * seg + gap.
double shift_measure(const RealSeries& x, std::size_t segment_length, std::size_t gap);

struct ShiftRow {
  unsigned order = 0;
  double shift = 0.0;
};

/// shift_measure of derived_image(x, k) for k = 0..max_order.
std::vector<ShiftRow> derived_shift_report(const RealSeries& x, unsigned max_order,
                                           std::size_t segment_length = 1, std::size_t gap = 0);

void write_report_csv(const std::filesystem::path& path, const EvalReport& report,
                      data::Split split, bool include_baseline);
void write_per_horizon_csv(const std::filesystem::path& path, const EvalReport& report);
void write_shift_report_csv(const std::filesystem::path& path, const std::vector<ShiftRow>& rows);

}  // namespace derits::eval
