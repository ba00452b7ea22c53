#include "derits/eval.hpp"

#include <cmath>
#include <fstream>

#include "derits/error.hpp"
#include "derits/spectral.hpp"

namespace derits::eval {

EvalReport score(const std::vector<RealSeries>& predictions,
                 const std::vector<data::WindowSample>& samples) {
  if (predictions.size() != samples.size()) {
    throw Error(ErrorKind::kShape, "score: prediction and sample counts differ");
  }
  if (samples.empty()) throw Error(ErrorKind::kInsufficientData, "score: no windows to evaluate");
  const std::size_t horizon = samples.front().y.length();
  EvalReport report;
  report.per_horizon_mae.assign(horizon, 0.0);
  report.sample_count = samples.size();

  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double baseline_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& y = samples[s].y;
    const auto& p = predictions[s];
    if (p.length() != y.length() || p.channels() != y.channels() || y.length() != horizon) {
      throw Error(ErrorKind::kShape, "score: prediction shape does not match target");
    }
    const std::size_t last = samples[s].x.length() - 1;
    for (std::size_t h = 0; h < horizon; ++h) {
      for (std::size_t d = 0; d < y.channels(); ++d) {
        const double err = p(h, d) - y(h, d);
        abs_sum += std::abs(err);
        sq_sum += err * err;
        report.per_horizon_mae[h] += std::abs(err);
        baseline_sum += std::abs(samples[s].x(last, d) - y(h, d));
      }
    }
    count += horizon * y.channels();
  }
  const double n = static_cast<double>(count);
  report.mae = abs_sum / n;
  report.rmse = std::sqrt(sq_sum / n);
  report.baseline_mae = baseline_sum / n;
  const double per_step = n / static_cast<double>(horizon);
  for (auto& v : report.per_horizon_mae) v /= per_step;
  return report;
}

EvalReport evaluate(const model::ModelParams& params, const data::Dataset& dataset,
                    data::Split split) {
  const auto& cfg = params.config;
  auto samples = data::windows(dataset, split, cfg.lookback, cfg.horizon);
  if (samples.empty()) {
    throw Error(ErrorKind::kInsufficientData,
                "split '" + data::to_string(split) + "' has no windows of length L + H");
  }
  std::vector<RealSeries> predictions;
  predictions.reserve(samples.size());
  for (const auto& s : samples) predictions.push_back(model::model_forward(s.x, params).first);
  return score(predictions, samples);
}

RealSeries baseline_repeat_last(const RealSeries& x, std::size_t horizon) {
  if (x.length() == 0) throw Error(ErrorKind::kShape, "baseline_repeat_last: empty lookback");
  RealSeries out(horizon, x.channels());
  const auto last = x.values().row(x.length() - 1);
  for (std::size_t h = 0; h < horizon; ++h) {
    auto row = out.values().row(h);
    std::copy(last.begin(), last.end(), row.begin());
  }
  return out;
}

double shift_measure(const RealSeries& x, std::size_t segment_length, std::size_t gap) {
  if (segment_length == 0) throw Error(ErrorKind::kConfig, "segment length must be >= 1");
  const std::size_t total = x.length();
  if (total < 2 * segment_length + gap) {
    throw Error(ErrorKind::kInsufficientData,
                "shift_measure needs at least 2 * segment + gap = " +
                    std::to_string(2 * segment_length + gap) + " rows, got " + std::to_string(total));
  }
  const std::size_t pairs = total - 2 * segment_length - gap + 1;
  const double seg = static_cast<double>(segment_length);
  double acc = 0.0;
  for (std::size_t d = 0; d < x.channels(); ++d) {
    // prefix[i] = sum of x[0..i)
    std::vector<double> prefix(total + 1, 0.0);
    for (std::size_t t = 0; t < total; ++t) prefix[t + 1] = prefix[t] + x(t, d);
    double channel_acc = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
      // first segment [i, i + seg), second [i + seg + gap, i + 2 seg + gap)
      const std::size_t a = i;
      const std::size_t b = i + segment_length + gap;
      const double first = (prefix[a + segment_length] - prefix[a]) / seg;
      const double second = (prefix[b + segment_length] - prefix[b]) / seg;
      channel_acc += std::abs(first - second);
    }
    acc += channel_acc / static_cast<double>(pairs);
  }
  return acc / static_cast<double>(x.channels());
}

std::vector<ShiftRow> derived_shift_report(const RealSeries& x, unsigned max_order,
                                           std::size_t segment_length, std::size_t gap) {
  std::vector<ShiftRow> rows;
  for (unsigned k = 0; k <= max_order; ++k) {
    const RealSeries image = k == 0 ? x : spectral::derived_image(x, k);
    rows.push_back({k, shift_measure(image, segment_length, gap)});
  }
  return rows;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report,
                      data::Split split, bool include_baseline) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << "split,mae,rmse,samples";
  if (include_baseline) out << ",baseline_mae";
  out << '\n' << data::to_string(split) << ',' << data::format_real(report.mae) << ','
      << data::format_real(report.rmse) << ',' << report.sample_count;
  if (include_baseline) out << ',' << data::format_real(report.baseline_mae);
  out << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing: " + path.string());
}

void write_per_horizon_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << "step,mae\n";
  for (std::size_t h = 0; h < report.per_horizon_mae.size(); ++h) {
    out << h + 1 << ',' << data::format_real(report.per_horizon_mae[h]) << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing: " + path.string());
}

void write_shift_report_csv(const std::filesystem::path& path, const std::vector<ShiftRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << "order,shift\n";
  for (const auto& r : rows) out << r.order << ',' << data::format_real(r.shift) << '\n';
  if (!out) throw Error(ErrorKind::kIo, "failed writing: " + path.string());
}

}  // namespace derits::eval
