#include "derits/series.hpp"

#include <algorithm>
#include <cmath>

#include "derits/error.hpp"

namespace derits {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInconsistentSpectrum: return "inconsistent-spectrum";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kCorruptedMask: return "corrupted-mask";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kCompatibility: return "compatibility";
  }
  return "unknown";
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

RealSeries RealSeries::column(std::span<const double> values) {
  RealSeries out(values.size(), 1);
  std::copy(values.begin(), values.end(), out.values_.flat().begin());
  return out;
}

std::vector<double> RealSeries::channel(std::size_t d) const {
  std::vector<double> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = values_(t, d);
  return out;
}

RealSeries RealSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) {
    throw Error(ErrorKind::kShape, "slice [" + std::to_string(begin) + ", " +
                                       std::to_string(end) + ") out of range for length " +
                                       std::to_string(length()));
  }
  RealSeries out(end - begin, channels());
  auto src = values_.flat().subspan(begin * channels(), (end - begin) * channels());
  std::copy(src.begin(), src.end(), out.values_.flat().begin());
  return out;
}

bool RealSeries::all_finite() const noexcept {
  const auto v = values_.flat();
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace derits
