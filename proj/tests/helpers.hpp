#pragma once

#include <complex>
#include <random>
#include <vector>

#include "derits/series.hpp"
#include "oracles.hpp"

namespace testing {

inline derits::RealSeries random_series(std::mt19937_64& rng, std::size_t length,
                                        std::size_t channels, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  derits::RealSeries x(length, channels);
  for (auto& v : x.values().flat()) v = d(rng);
  return x;
}

inline oracle::CVec channel_spectrum(const derits::Spectrum& s, std::size_t d) {
  oracle::CVec out(s.bins());
  for (std::size_t i = 0; i < s.bins(); ++i) out[i] = {s.re(i, d), s.im(i, d)};
  return out;
}

inline derits::Spectrum make_spectrum(const std::vector<std::complex<double>>& bins,
                                      std::size_t source_length) {
  derits::Spectrum s(source_length, 1);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    s.re(i, 0) = bins[i].real();
    s.im(i, 0) = bins[i].imag();
  }
  return s;
}

inline double max_relative_error(const derits::RealSeries& got, const derits::RealSeries& want) {
  double diff = 0.0;
  double scale = 0.0;
  const auto g = got.values().flat();
  const auto w = want.values().flat();
  for (std::size_t i = 0; i < g.size(); ++i) {
    diff = std::max(diff, std::abs(g[i] - w[i]));
    scale = std::max(scale, std::abs(w[i]));
  }
  return diff / std::max(scale, 1e-300);
}

}  // namespace testing
