#include "derits/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "derits/error.hpp"

namespace derits::spectral {
namespace {

constexpr double kRealnessTolerance = 1e-8;

// Weight of bin i when folding the half spectrum back into a real signal.
double fold_weight(std::size_t bin, std::size_t length) {
  if (bin == 0) return 1.0;
  if (length % 2 == 0 && bin == length / 2) return 1.0;
  return 2.0;
}

void check_realness(const Spectrum& s) {
  const std::size_t length = s.source_length;
  for (std::size_t d = 0; d < s.channels(); ++d) {
    double scale = 1.0;
    for (std::size_t i = 0; i < s.bins(); ++i) {
      scale = std::max({scale, std::abs(s.re(i, d)), std::abs(s.im(i, d))});
    }
    const double limit = kRealnessTolerance * scale;
    if (std::abs(s.im(0, d)) > limit) {
      throw Error(ErrorKind::kInconsistentSpectrum,
                  "DC bin of channel " + std::to_string(d) + " has imaginary part " +
                      std::to_string(s.im(0, d)));
    }
    if (length % 2 == 0 && std::abs(s.im(length / 2, d)) > limit) {
      throw Error(ErrorKind::kInconsistentSpectrum,
                  "Nyquist bin of channel " + std::to_string(d) + " has imaginary part " +
                      std::to_string(s.im(length / 2, d)));
    }
  }
}

void check_well_formed(const Spectrum& s) {
  if (s.source_length == 0 || s.bins() != half_spectrum_bins(s.source_length) ||
      s.im.rows() != s.re.rows() || s.im.cols() != s.re.cols()) {
    throw Error(ErrorKind::kShape, "spectrum has " + std::to_string(s.bins()) +
                                       " bins for source length " +
                                       std::to_string(s.source_length));
  }
}

}  // namespace

DftPlan::DftPlan(std::size_t length) : length_(length), cos_(length), sin_(length) {
  if (length == 0) throw Error(ErrorKind::kShape, "transform length must be positive");
  for (std::size_t m = 0; m < length; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(length);
    cos_[m] = std::cos(angle);
    sin_[m] = std::sin(angle);
  }
}

Spectrum DftPlan::forward(const RealSeries& x) const {
  if (x.length() != length_) {
    throw Error(ErrorKind::kShape, "plan length " + std::to_string(length_) +
                                       " does not match series length " +
                                       std::to_string(x.length()));
  }
  if (!x.all_finite()) throw Error(ErrorKind::kInvalidInput, "dft_forward: non-finite input");
  const std::size_t channels = x.channels();
  Spectrum out(length_, channels);
  for (std::size_t i = 0; i < out.bins(); ++i) {
    auto re = out.re.row(i);
    auto im = out.im.row(i);
    std::size_t m = 0;  // (i * n) mod L
    for (std::size_t n = 0; n < length_; ++n) {
      const double c = cos_[m];
      const double s = sin_[m];
      const auto xr = x.values().row(n);
      for (std::size_t d = 0; d < channels; ++d) {
        re[d] += xr[d] * c;
        im[d] -= xr[d] * s;
      }
      m += i;
      if (m >= length_) m -= length_;
    }
  }
  return out;
}

RealSeries DftPlan::inverse(const Spectrum& spectrum, ImagPolicy policy) const {
  check_well_formed(spectrum);
  if (spectrum.source_length != length_) {
    throw Error(ErrorKind::kShape, "plan length " + std::to_string(length_) +
                                       " does not match spectrum source length " +
                                       std::to_string(spectrum.source_length));
  }
  if (policy == ImagPolicy::kStrict) check_realness(spectrum);
  const std::size_t channels = spectrum.channels();
  const double inv_length = 1.0 / static_cast<double>(length_);
  RealSeries out(length_, channels);
  for (std::size_t i = 0; i < spectrum.bins(); ++i) {
    const double w = fold_weight(i, length_) * inv_length;
    const auto re = spectrum.re.row(i);
    const auto im = spectrum.im.row(i);
    std::size_t m = 0;
    for (std::size_t n = 0; n < length_; ++n) {
      const double c = w * cos_[m];
      const double s = w * sin_[m];
      auto xr = out.values().row(n);
      for (std::size_t d = 0; d < channels; ++d) xr[d] += re[d] * c - im[d] * s;
      m += i;
      if (m >= length_) m -= length_;
    }
  }
  return out;
}

RealSeries DftPlan::forward_adjoint(const Spectrum& grad) const {
  check_well_formed(grad);
  const std::size_t channels = grad.channels();
  RealSeries out(length_, channels);
  for (std::size_t i = 0; i < grad.bins(); ++i) {
    const auto gr = grad.re.row(i);
    const auto gi = grad.im.row(i);
    std::size_t m = 0;
    for (std::size_t n = 0; n < length_; ++n) {
      const double c = cos_[m];
      const double s = sin_[m];
      auto xr = out.values().row(n);
      for (std::size_t d = 0; d < channels; ++d) xr[d] += gr[d] * c - gi[d] * s;
      m += i;
      if (m >= length_) m -= length_;
    }
  }
  return out;
}

Spectrum DftPlan::inverse_adjoint(const RealSeries& grad) const {
  if (grad.length() != length_) {
    throw Error(ErrorKind::kShape, "inverse_adjoint: gradient length mismatch");
  }
  const std::size_t channels = grad.channels();
  const double inv_length = 1.0 / static_cast<double>(length_);
  Spectrum out(length_, channels);
  for (std::size_t i = 0; i < out.bins(); ++i) {
    const double w = fold_weight(i, length_) * inv_length;
    auto re = out.re.row(i);
    auto im = out.im.row(i);
    std::size_t m = 0;
    for (std::size_t n = 0; n < length_; ++n) {
      const double c = w * cos_[m];
      const double s = w * sin_[m];
      const auto gr = grad.values().row(n);
      for (std::size_t d = 0; d < channels; ++d) {
        re[d] += gr[d] * c;
        im[d] -= gr[d] * s;
      }
      m += i;
      if (m >= length_) m -= length_;
    }
  }
  return out;
}

std::vector<double> frequency_grid(std::size_t length) {
  std::vector<double> freqs(half_spectrum_bins(length));
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    freqs[i] = static_cast<double>(i) / static_cast<double>(length);
  }
  return freqs;
}

std::vector<std::complex<double>> derivative_factors(std::size_t length, unsigned order) {
  if (length == 0) throw Error(ErrorKind::kShape, "derivative_factors: length must be positive");
  const auto freqs = frequency_grid(length);
  std::vector<std::complex<double>> factors(freqs.size(), {1.0, 0.0});
  if (order == 0) return factors;
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    // (j w)^k = w^k * j^k, with j^k cycling through 1, j, -1, -j.
    const double magnitude = std::pow(2.0 * std::numbers::pi * freqs[i], static_cast<double>(order));
    switch (order % 4) {
      case 0: factors[i] = {magnitude, 0.0}; break;
      case 1: factors[i] = {0.0, magnitude}; break;
      case 2: factors[i] = {-magnitude, 0.0}; break;
      default: factors[i] = {0.0, -magnitude}; break;
    }
  }
  return factors;
}

void scale_by_factors(Spectrum& spectrum, const std::vector<std::complex<double>>& factors,
                      bool divide, bool conjugate) {
  if (factors.size() != spectrum.bins()) {
    throw Error(ErrorKind::kShape, "factor count does not match spectrum bins");
  }
  for (std::size_t i = 1; i < spectrum.bins(); ++i) {
    std::complex<double> a = divide ? 1.0 / factors[i] : factors[i];
    if (conjugate) a = std::conj(a);
    auto re = spectrum.re.row(i);
    auto im = spectrum.im.row(i);
    for (std::size_t d = 0; d < spectrum.channels(); ++d) {
      const double r = re[d];
      const double m = im[d];
      re[d] = a.real() * r - a.imag() * m;
      im[d] = a.real() * m + a.imag() * r;
    }
  }
}

Spectrum dft_forward(const RealSeries& x) { return DftPlan(x.length()).forward(x); }

RealSeries dft_inverse(const Spectrum& spectrum, ImagPolicy policy) {
  check_well_formed(spectrum);
  return DftPlan(spectrum.source_length).inverse(spectrum, policy);
}

Spectrum fdo_apply(const Spectrum& spectrum, unsigned order) {
  check_well_formed(spectrum);
  Spectrum out = spectrum;
  if (order > 0) scale_by_factors(out, derivative_factors(out.source_length, order), false);
  return out;
}

Spectrum fdo_inverse(const Spectrum& spectrum, unsigned order) {
  check_well_formed(spectrum);
  Spectrum out = spectrum;
  if (order > 0) scale_by_factors(out, derivative_factors(out.source_length, order), true);
  return out;
}

Spectrum fdt(const RealSeries& x, unsigned order) { return fdo_apply(dft_forward(x), order); }

RealSeries ifdt(const Spectrum& spectrum, unsigned order) {
  return dft_inverse(fdo_inverse(spectrum, order));
}

RealSeries derived_image(const RealSeries& x, unsigned order) {
  return dft_inverse(fdt(x, order), ImagPolicy::kProject);
}

}  // namespace derits::spectral
