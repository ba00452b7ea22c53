#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "derits/series.hpp"
#include "derits/spectral.hpp"

namespace derits::model {

struct ModelConfig {
  std::size_t lookback = 96;     // L
  std::size_t horizon = 96;      // H
  std::size_t channels = 1;      // D, echoed so checkpoints can be matched to data
  unsigned branches = 2;         // K; branch orders are 1..K
  std::size_t fusion_hidden = 0; // 0 selects 4 * horizon
  // Single branch of the given order (0 allowed) with a full-pass mask.
  std::optional<unsigned> ablation_order;
  std::uint64_t seed = 0;

  std::size_t bins() const noexcept { return half_spectrum_bins(lookback); }
  std::size_t hidden_width() const noexcept { return fusion_hidden ? fusion_hidden : 4 * horizon; }
  std::vector<unsigned> branch_orders() const;
  /// The K that enters the mask size S / 2^(K - k).
  unsigned mask_span() const noexcept;

  /// Throws kConfig when a field is out of range.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Learnables of one order-k branch. W is the complex S x S frequency mixing
/// matrix stored as separate real and imaginary planes.
struct BranchParams {
  unsigned order = 1;
  std::vector<double> v;  // per sorted rank gain, length S
  Matrix w_re;            // [S x S]
  Matrix w_im;
  std::vector<double> grad_v;
  Matrix grad_w_re;
  Matrix grad_w_im;

  BranchParams() = default;
  BranchParams(unsigned k, std::size_t bins);

  std::size_t bins() const noexcept { return v.size(); }
};

/// Record of the amplitude sort and mask applied in one forward pass.
struct FilterMask {
  std::size_t keep = 0;
  // permutation[d][p] is the frequency bin placed at sorted position p in channel d.
  std::vector<std::vector<std::size_t>> permutation;
};

/// One-hidden-layer ReLU network applied per channel: K*L -> hidden -> H.
struct FusionParams {
  Matrix w1;  // [hidden x K*L]
  std::vector<double> b1;
  Matrix w2;  // [H x hidden]
  std::vector<double> b2;
  Matrix grad_w1;
  std::vector<double> grad_b1;
  Matrix grad_w2;
  std::vector<double> grad_b2;

  FusionParams() = default;
  FusionParams(std::size_t inputs, std::size_t hidden, std::size_t outputs);
};

struct ModelParams {
  ModelConfig config;
  std::vector<BranchParams> branches;
  FusionParams fusion;
};

/// Named view of one learnable tensor and its gradient buffer.
struct ParamRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> value;
  std::span<double> grad;
};

struct ConstParamRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> value;
};

/// Fixed order: branches by order (v, W.re, W.im), then fusion (w1, b1, w2, b2).
std::vector<ParamRef> parameters(ModelParams& params);
std::vector<ConstParamRef> parameters(const ModelParams& params);

/// Shape-correct parameters with all values zero.
ModelParams zero_params(const ModelConfig& config);
/// Near-identity branches and Glorot-uniform fusion, seeded by config.seed.
ModelParams init_params(const ModelConfig& config);

void zero_grad(ModelParams& params);

/// max(1, S / 2^(K - k)) with integer division; k >= K keeps every bin.
std::size_t mask_keep(std::size_t bins, unsigned span, unsigned order) noexcept;

/// Sort each channel's bins by descending amplitude (ties: lower bin first),
/// scale sorted rank p by v[p] and zero ranks >= keep. Output stays in sorted order.
std::pair<Spectrum, FilterMask> filter_forward(const Spectrum& x, const BranchParams& params,
                                               unsigned span);

/// Put sorted-order bins back at their frequency positions.
Spectrum filter_unsort(const Spectrum& sorted, const FilterMask& mask);

/// Per channel complex row-vector times W: out_j = sum_i h_i W_ij.
Spectrum fourier_conv(const Spectrum& h, const BranchParams& params);

struct BranchCache {
  Spectrum derived;   // fdt(x, k)
  Spectrum filtered;  // filter_forward output, sorted order
  FilterMask mask;
};

std::pair<RealSeries, BranchCache> branch_forward(const RealSeries& x, const BranchParams& params,
                                                  unsigned span);
std::pair<RealSeries, BranchCache> branch_forward(const RealSeries& x, const BranchParams& params,
                                                  unsigned span, const spectral::DftPlan& plan);

/// Accumulates into params.grad_* and returns the gradient on the branch input.
RealSeries branch_backward(BranchParams& params, const BranchCache& cache,
                           const RealSeries& grad_out, const spectral::DftPlan& plan);

struct ModelCache {
  std::vector<BranchCache> branches;
  Matrix features;        // [D x K*L], branch outputs concatenated per channel
  Matrix pre_activation;  // [D x hidden]
  Matrix hidden;          // [D x hidden]
  std::size_t lookback = 0;
  std::size_t horizon = 0;
};

std::pair<RealSeries, ModelCache> model_forward(const RealSeries& x, const ModelParams& params);

/// Reverse pass for one forward call. Parameter gradients are added to the
/// buffers in `params`; the returned series is the gradient on the input.
/// Sort permutations and masks from the forward pass are held fixed.
RealSeries model_backward(ModelParams& params, const ModelCache& cache, const RealSeries& grad_out);

}  // namespace derits::model
