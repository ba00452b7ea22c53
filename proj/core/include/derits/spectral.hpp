#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "derits/series.hpp"

// Discrete Fourier machinery for the frequency derivative transform.
//
// Conventions, fixed here and used everywhere else:
//   * forward transform is unnormalized, inverse carries 1/L;
//   * only bins 0..floor(L/2) are stored (real input);
//   * bin i sits at frequency i/L cycles per timestep;
//   * the derivative factor (j 2 pi f)^k is replaced by 1 at bin 0, so the
//     mean passes through both the operator and its inverse untouched.

namespace derits::spectral {

/// How dft_inverse treats imaginary parts at DC and Nyquist.
enum class ImagPolicy {
  kStrict,   // reject spectra whose DC/Nyquist imaginary part exceeds 1e-8 (relative)
  kProject,  // keep the real part of the reconstruction
};

/// Twiddle table for one transform length. Immutable after construction.
class DftPlan {
 public:
  explicit DftPlan(std::size_t length);

  std::size_t length() const noexcept { return length_; }
  std::size_t bins() const noexcept { return half_spectrum_bins(length_); }

  Spectrum forward(const RealSeries& x) const;
  RealSeries inverse(const Spectrum& spectrum, ImagPolicy policy = ImagPolicy::kStrict) const;

  // Adjoints with respect to the real and imaginary parts, used by backprop.
  // forward_adjoint maps a gradient on the spectrum to a gradient on x;
  // inverse_adjoint maps a gradient on the time signal to a gradient on the
  // spectrum (for the kProject inverse).
  RealSeries forward_adjoint(const Spectrum& grad) const;
  Spectrum inverse_adjoint(const RealSeries& grad) const;

 private:
  std::size_t length_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

std::vector<double> frequency_grid(std::size_t length);

/// (j 2 pi i/L)^k per stored bin, with bin 0 forced to 1.
std::vector<std::complex<double>> derivative_factors(std::size_t length, unsigned order);

Spectrum dft_forward(const RealSeries& x);
RealSeries dft_inverse(const Spectrum& spectrum, ImagPolicy policy = ImagPolicy::kStrict);

Spectrum fdo_apply(const Spectrum& spectrum, unsigned order);
Spectrum fdo_inverse(const Spectrum& spectrum, unsigned order);

/// Frequency derivative transform: fdo_apply(dft_forward(x), order).
Spectrum fdt(const RealSeries& x, unsigned order);
/// Inverse transform: dft_inverse(fdo_inverse(spectrum, order)).
RealSeries ifdt(const Spectrum& spectrum, unsigned order);

/// Time-domain picture of fdt(x, order), i.e. the spectral k-th derivative
/// with the mean retained. Odd orders leave an imaginary Nyquist bin, which is
/// dropped by projecting onto real signals.
RealSeries derived_image(const RealSeries& x, unsigned order);

/// In-place per-bin multiply (or divide) by derivative factors, shared with the
/// model's forward and backward passes. `conjugate` applies conj(factor).
void scale_by_factors(Spectrum& spectrum, const std::vector<std::complex<double>>& factors,
                      bool divide, bool conjugate = false);

}  // namespace derits::spectral
