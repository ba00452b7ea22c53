#include "derits/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include "derits/error.hpp"

namespace derits::data {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string position(std::size_t line, std::size_t column) {
  return "(" + std::to_string(line) + "," + std::to_string(column) + ")";
}

}  // namespace

std::string format_real(double value) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

LoadedCsv load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open CSV file: " + path.string());

  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  LoadedCsv out;
  std::vector<double> values;
  std::size_t columns = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      if (fields.size() < 2) {
        throw Error(ErrorKind::kFormat, path.string() + ": header needs a timestamp column and at "
                                                        "least one channel");
      }
      columns = fields.size();
      for (std::size_t c = 1; c < fields.size(); ++c) out.channel_names.emplace_back(fields[c]);
      have_header = true;
      continue;
    }
    if (fields.size() != columns) {
      throw Error(ErrorKind::kFormat, path.string() + ": line " + std::to_string(line_no) +
                                          " has " + std::to_string(fields.size()) +
                                          " fields, header has " + std::to_string(columns));
    }
    out.timestamps.emplace_back(fields[0]);
    for (std::size_t c = 1; c < columns; ++c) {
      const auto cell = fields[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw Error(ErrorKind::kParse, path.string() + ": cannot parse '" + std::string(cell) +
                                           "' at " + position(line_no, c + 1));
      }
      values.push_back(v);
    }
  }
  if (!have_header) throw Error(ErrorKind::kFormat, path.string() + ": empty file");
  if (out.timestamps.empty()) throw Error(ErrorKind::kFormat, path.string() + ": no data rows");

  const std::size_t channels = columns - 1;
  out.series = RealSeries(out.timestamps.size(), channels);
  std::copy(values.begin(), values.end(), out.series.values().flat().begin());
  return out;
}

void write_csv(const std::filesystem::path& path, const RealSeries& series,
               const std::vector<std::string>& channel_names,
               const std::vector<std::string>& timestamps, const std::string& timestamp_header) {
  if (channel_names.size() != series.channels()) {
    throw Error(ErrorKind::kShape, "write_csv: channel name count does not match series");
  }
  if (!timestamps.empty() && timestamps.size() != series.length()) {
    throw Error(ErrorKind::kShape, "write_csv: timestamp count does not match series");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open for writing: " + path.string());
  out << timestamp_header;
  for (const auto& name : channel_names) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < series.length(); ++t) {
    out << (timestamps.empty() ? std::to_string(t) : timestamps[t]);
    for (std::size_t d = 0; d < series.channels(); ++d) out << ',' << format_real(series(t, d));
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing: " + path.string());
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error(ErrorKind::kConfig, "unknown split '" + name + "' (expected train, val or test)");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::pair<std::size_t, std::size_t> Dataset::bounds(Split split) const {
  switch (split) {
    case Split::kTrain: return {0, train_end};
    case Split::kVal: return {train_end, val_end};
    case Split::kTest: return {val_end, series.length()};
  }
  return {0, 0};
}

SplitResult split_normalize(const RealSeries& series, std::size_t lookback, std::size_t horizon,
                            std::vector<std::string> channel_names) {
  const std::size_t total = series.length();
  if (total < lookback + horizon + 10) {
    throw Error(ErrorKind::kInsufficientData,
                "series has " + std::to_string(total) + " rows; need at least L + H + 10 = " +
                    std::to_string(lookback + horizon + 10));
  }
  if (!series.all_finite()) throw Error(ErrorKind::kInvalidInput, "series contains non-finite values");
  const std::size_t channels = series.channels();
  if (channel_names.empty()) {
    for (std::size_t d = 0; d < channels; ++d) channel_names.push_back("x" + std::to_string(d));
  }
  if (channel_names.size() != channels) {
    throw Error(ErrorKind::kShape, "channel name count does not match series");
  }

  SplitResult result;
  Dataset& ds = result.dataset;
  ds.train_end = total * 7 / 10;
  ds.val_end = total * 9 / 10;
  ds.channel_names = std::move(channel_names);

  NormStats& stats = result.stats;
  stats.mean.assign(channels, 0.0);
  stats.std.assign(channels, 0.0);
  const double n = static_cast<double>(ds.train_end);
  for (std::size_t d = 0; d < channels; ++d) {
    double sum = 0.0;
    for (std::size_t t = 0; t < ds.train_end; ++t) sum += series(t, d);
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t t = 0; t < ds.train_end; ++t) sq += (series(t, d) - mean) * (series(t, d) - mean);
    stats.mean[d] = mean;
    stats.std[d] = std::max(std::sqrt(sq / n), kStdFloor);
  }

  ds.series = RealSeries(total, channels);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t d = 0; d < channels; ++d) {
      ds.series(t, d) = (series(t, d) - stats.mean[d]) / stats.std[d];
    }
  }
  return result;
}

std::vector<WindowSample> windows(const Dataset& dataset, Split split, std::size_t lookback,
                                  std::size_t horizon) {
  const auto [begin, end] = dataset.bounds(split);
  std::vector<WindowSample> out;
  const std::size_t count = window_count(end - begin, lookback, horizon);
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = begin + lookback + i;
    out.push_back({dataset.series.slice(t - lookback, t), dataset.series.slice(t, t + horizon), t});
  }
  return out;
}

RealSeries synth_nonstationary(const SynthSpec& spec) {
  if (spec.length < 2) throw Error(ErrorKind::kConfig, "synthetic length must be >= 2");
  if (!(spec.noise_std >= 0.0)) throw Error(ErrorKind::kConfig, "noise_std must be >= 0");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double total = static_cast<double>(spec.length);
  RealSeries out(spec.length, 1);
  for (std::size_t t = 0; t < spec.length; ++t) {
    const double u = static_cast<double>(t) / total;
    double trend = 0.0;
    double power = 1.0;
    for (double c : spec.trend_coeffs) {
      power *= u;
      trend += c * power;
    }
    double value = trend + spec.sin_amp * std::cos(2.0 * std::numbers::pi * spec.sin_freq * static_cast<double>(t) +
                                                   spec.sin_phase);
    if (spec.noise_std > 0.0) value += spec.noise_std * noise(rng);
    out(t, 0) = value;
  }
  return out;
}

}  // namespace derits::data
