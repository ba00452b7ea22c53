#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace derits {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Real-valued time-domain data, rows are timesteps and columns are channels.
/// Raw series, lookback windows, horizons and predictions all use this type.
class RealSeries {
 public:
  RealSeries() = default;
  RealSeries(std::size_t length, std::size_t channels, double fill = 0.0)
      : values_(length, channels, fill) {}
  explicit RealSeries(Matrix values) : values_(std::move(values)) {}

  /// Single-channel series from a column of values.
  static RealSeries column(std::span<const double> values);

  std::size_t length() const noexcept { return values_.rows(); }
  std::size_t channels() const noexcept { return values_.cols(); }

  double& operator()(std::size_t t, std::size_t d) noexcept { return values_(t, d); }
  double operator()(std::size_t t, std::size_t d) const noexcept { return values_(t, d); }

  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  std::vector<double> channel(std::size_t d) const;

  /// Rows [begin, end) as a new series.
  RealSeries slice(std::size_t begin, std::size_t end) const;

  bool all_finite() const noexcept;

  friend bool operator==(const RealSeries&, const RealSeries&) = default;

 private:
  Matrix values_;
};

/// Half spectrum of a real signal: bins 0..floor(L/2) per channel.
struct Spectrum {
  Matrix re;  // [bins x channels]
  Matrix im;  // [bins x channels]
  std::size_t source_length = 0;

  Spectrum() = default;
  Spectrum(std::size_t source_len, std::size_t channels)
      : re(source_len / 2 + 1, channels), im(source_len / 2 + 1, channels),
        source_length(source_len) {}

  std::size_t bins() const noexcept { return re.rows(); }
  std::size_t channels() const noexcept { return re.cols(); }
};

/// Bin count of the real-input transform of a length-L signal.
constexpr std::size_t half_spectrum_bins(std::size_t length) noexcept { return length / 2 + 1; }

}  // namespace derits
