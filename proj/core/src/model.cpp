#include "derits/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "derits/error.hpp"

namespace derits::model {
namespace {

void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) throw Error(kind, message);
}

std::string branch_prefix(const BranchParams& b) { return "branch" + std::to_string(b.order); }

void check_branch_shape(const Spectrum& s, const BranchParams& params, const char* what) {
  require(s.bins() == params.bins(), ErrorKind::kShape,
          std::string(what) + ": spectrum has " + std::to_string(s.bins()) +
              " bins, branch expects " + std::to_string(params.bins()));
}

}  // namespace

std::vector<unsigned> ModelConfig::branch_orders() const {
  if (ablation_order) return {*ablation_order};
  std::vector<unsigned> orders(branches);
  std::iota(orders.begin(), orders.end(), 1U);
  return orders;
}

unsigned ModelConfig::mask_span() const noexcept {
  return ablation_order ? *ablation_order : branches;
}

void ModelConfig::validate() const {
  require(lookback >= 1, ErrorKind::kConfig, "lookback must be >= 1");
  require(horizon >= 1, ErrorKind::kConfig, "horizon must be >= 1");
  require(channels >= 1, ErrorKind::kConfig, "channels must be >= 1");
  require(branches >= 1, ErrorKind::kConfig, "branches must be >= 1");
  require(hidden_width() >= 1, ErrorKind::kConfig, "fusion hidden width must be >= 1");
}

BranchParams::BranchParams(unsigned k, std::size_t bins)
    : order(k), v(bins, 0.0), w_re(bins, bins), w_im(bins, bins), grad_v(bins, 0.0),
      grad_w_re(bins, bins), grad_w_im(bins, bins) {}

FusionParams::FusionParams(std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : w1(hidden, inputs), b1(hidden, 0.0), w2(outputs, hidden), b2(outputs, 0.0),
      grad_w1(hidden, inputs), grad_b1(hidden, 0.0), grad_w2(outputs, hidden),
      grad_b2(outputs, 0.0) {}

std::vector<ParamRef> parameters(ModelParams& params) {
  std::vector<ParamRef> refs;
  for (auto& b : params.branches) {
    const auto prefix = branch_prefix(b);
    const std::size_t s = b.bins();
    refs.push_back({prefix + ".v", {s}, b.v, b.grad_v});
    refs.push_back({prefix + ".W.re", {s, s}, b.w_re.flat(), b.grad_w_re.flat()});
    refs.push_back({prefix + ".W.im", {s, s}, b.w_im.flat(), b.grad_w_im.flat()});
  }
  auto& f = params.fusion;
  refs.push_back({"fusion.w1", {f.w1.rows(), f.w1.cols()}, f.w1.flat(), f.grad_w1.flat()});
  refs.push_back({"fusion.b1", {f.b1.size()}, f.b1, f.grad_b1});
  refs.push_back({"fusion.w2", {f.w2.rows(), f.w2.cols()}, f.w2.flat(), f.grad_w2.flat()});
  refs.push_back({"fusion.b2", {f.b2.size()}, f.b2, f.grad_b2});
  return refs;
}

std::vector<ConstParamRef> parameters(const ModelParams& params) {
  // The mutable overload only builds views; nothing is written through them here.
  auto refs = parameters(const_cast<ModelParams&>(params));
  std::vector<ConstParamRef> out;
  out.reserve(refs.size());
  for (auto& r : refs) out.push_back({std::move(r.name), std::move(r.shape), r.value});
  return out;
}

ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  params.config = config;
  const std::size_t bins = config.bins();
  for (unsigned k : config.branch_orders()) params.branches.emplace_back(k, bins);
  params.fusion = FusionParams(params.branches.size() * config.lookback, config.hidden_width(),
                               config.horizon);
  return params;
}

ModelParams init_params(const ModelConfig& config) {
  ModelParams params = zero_params(config);
  std::mt19937_64 rng(config.seed);
  const std::size_t bins = config.bins();
  std::uniform_real_distribution<double> gain(0.9, 1.1);
  std::normal_distribution<double> perturb(0.0, 0.02 / std::sqrt(static_cast<double>(bins)));
  for (auto& b : params.branches) {
    for (auto& g : b.v) g = gain(rng);
    for (std::size_t i = 0; i < bins; ++i) {
      for (std::size_t j = 0; j < bins; ++j) {
        b.w_re(i, j) = (i == j ? 1.0 : 0.0) + perturb(rng);
        b.w_im(i, j) = perturb(rng);
      }
    }
  }
  auto glorot = [&rng](Matrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : w.flat()) x = dist(rng);
  };
  glorot(params.fusion.w1);
  glorot(params.fusion.w2);
  return params;
}

void zero_grad(ModelParams& params) {
  for (auto& ref : parameters(params)) std::fill(ref.grad.begin(), ref.grad.end(), 0.0);
}

std::size_t mask_keep(std::size_t bins, unsigned span, unsigned order) noexcept {
  const unsigned exponent = span > order ? span - order : 0;
  if (exponent >= 63) return std::min<std::size_t>(1, bins);
  return std::max<std::size_t>(1, bins >> exponent);
}

std::pair<Spectrum, FilterMask> filter_forward(const Spectrum& x, const BranchParams& params,
                                               unsigned span) {
  check_branch_shape(x, params, "filter_forward");
  const std::size_t bins = x.bins();
  FilterMask mask;
  mask.keep = mask_keep(bins, span, params.order);
  mask.permutation.resize(x.channels());

  Spectrum out(x.source_length, x.channels());
  std::vector<double> amplitude(bins);
  for (std::size_t d = 0; d < x.channels(); ++d) {
    for (std::size_t i = 0; i < bins; ++i) amplitude[i] = std::hypot(x.re(i, d), x.im(i, d));
    auto& perm = mask.permutation[d];
    perm.resize(bins);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return amplitude[a] > amplitude[b]; });
    for (std::size_t p = 0; p < mask.keep; ++p) {
      out.re(p, d) = params.v[p] * x.re(perm[p], d);
      out.im(p, d) = params.v[p] * x.im(perm[p], d);
    }
  }
  return {std::move(out), std::move(mask)};
}

Spectrum filter_unsort(const Spectrum& sorted, const FilterMask& mask) {
  const std::size_t bins = sorted.bins();
  if (mask.permutation.size() != sorted.channels()) {
    throw Error(ErrorKind::kCorruptedMask, "mask covers " +
                                               std::to_string(mask.permutation.size()) +
                                               " channels, spectrum has " +
                                               std::to_string(sorted.channels()));
  }
  Spectrum out(sorted.source_length, sorted.channels());
  std::vector<char> seen(bins);
  for (std::size_t d = 0; d < sorted.channels(); ++d) {
    const auto& perm = mask.permutation[d];
    if (perm.size() != bins) {
      throw Error(ErrorKind::kCorruptedMask, "permutation length does not match bin count");
    }
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t p = 0; p < bins; ++p) {
      if (perm[p] >= bins || seen[perm[p]]) {
        throw Error(ErrorKind::kCorruptedMask,
                    "permutation of channel " + std::to_string(d) + " is not a bijection");
      }
      seen[perm[p]] = 1;
      out.re(perm[p], d) = sorted.re(p, d);
      out.im(perm[p], d) = sorted.im(p, d);
    }
  }
  return out;
}

Spectrum fourier_conv(const Spectrum& h, const BranchParams& params) {
  check_branch_shape(h, params, "fourier_conv");
  require(params.w_re.rows() == params.bins() && params.w_re.cols() == params.bins() &&
              params.w_im.rows() == params.bins() && params.w_im.cols() == params.bins(),
          ErrorKind::kShape, "fourier_conv: W must be S x S");
  const std::size_t bins = h.bins();
  const std::size_t channels = h.channels();
  Spectrum out(h.source_length, channels);
  for (std::size_t i = 0; i < bins; ++i) {
    const auto hr = h.re.row(i);
    const auto hi = h.im.row(i);
    const auto wr = params.w_re.row(i);
    const auto wi = params.w_im.row(i);
    for (std::size_t d = 0; d < channels; ++d) {
      if (hr[d] == 0.0 && hi[d] == 0.0) continue;  // masked rank
      for (std::size_t j = 0; j < bins; ++j) {
        out.re(j, d) += hr[d] * wr[j] - hi[d] * wi[j];
        out.im(j, d) += hr[d] * wi[j] + hi[d] * wr[j];
      }
    }
  }
  return out;
}

std::pair<RealSeries, BranchCache> branch_forward(const RealSeries& x, const BranchParams& params,
                                                  unsigned span) {
  return branch_forward(x, params, span, spectral::DftPlan(x.length()));
}

std::pair<RealSeries, BranchCache> branch_forward(const RealSeries& x, const BranchParams& params,
                                                  unsigned span, const spectral::DftPlan& plan) {
  const auto factors = spectral::derivative_factors(x.length(), params.order);
  BranchCache cache;
  cache.derived = plan.forward(x);
  spectral::scale_by_factors(cache.derived, factors, false);
  std::tie(cache.filtered, cache.mask) = filter_forward(cache.derived, params, span);
  Spectrum mixed = filter_unsort(fourier_conv(cache.filtered, params), cache.mask);
  spectral::scale_by_factors(mixed, factors, true);
  RealSeries out = plan.inverse(mixed, spectral::ImagPolicy::kProject);
  return {std::move(out), std::move(cache)};
}

RealSeries branch_backward(BranchParams& params, const BranchCache& cache,
                           const RealSeries& grad_out, const spectral::DftPlan& plan) {
  const std::size_t bins = params.bins();
  const std::size_t channels = grad_out.channels();
  require(cache.derived.bins() == bins && cache.derived.channels() == channels, ErrorKind::kShape,
          "branch_backward: cache does not match gradient");
  const auto factors = spectral::derivative_factors(plan.length(), params.order);

  // Through the projecting inverse DFT and the inverse derivative operator.
  Spectrum g_unsorted = plan.inverse_adjoint(grad_out);
  spectral::scale_by_factors(g_unsorted, factors, true, true);

  // Unsort is a permutation; its adjoint gathers back into sorted order.
  Spectrum g_mixed(plan.length(), channels);
  for (std::size_t d = 0; d < channels; ++d) {
    const auto& perm = cache.mask.permutation[d];
    for (std::size_t p = 0; p < bins; ++p) {
      g_mixed.re(p, d) = g_unsorted.re(perm[p], d);
      g_mixed.im(p, d) = g_unsorted.im(perm[p], d);
    }
  }

  // out_j = sum_i h_i W_ij  =>  dW_ij += conj(h_i) g_j,  dh_i = sum_j conj(W_ij) g_j.
  const Spectrum& h = cache.filtered;
  Spectrum g_filtered(plan.length(), channels);
  for (std::size_t i = 0; i < cache.mask.keep; ++i) {
    auto gwr = params.grad_w_re.row(i);
    auto gwi = params.grad_w_im.row(i);
    const auto wr = params.w_re.row(i);
    const auto wi = params.w_im.row(i);
    for (std::size_t d = 0; d < channels; ++d) {
      const double hr = h.re(i, d);
      const double hi = h.im(i, d);
      double acc_r = 0.0;
      double acc_i = 0.0;
      for (std::size_t j = 0; j < bins; ++j) {
        const double gr = g_mixed.re(j, d);
        const double gi = g_mixed.im(j, d);
        gwr[j] += hr * gr + hi * gi;
        gwi[j] += hr * gi - hi * gr;
        acc_r += wr[j] * gr + wi[j] * gi;
        acc_i += wr[j] * gi - wi[j] * gr;
      }
      g_filtered.re(i, d) = acc_r;
      g_filtered.im(i, d) = acc_i;
    }
  }

  // Filter: out_p = v_p * x_perm[p] for p < keep.
  Spectrum g_derived(plan.length(), channels);
  for (std::size_t d = 0; d < channels; ++d) {
    const auto& perm = cache.mask.permutation[d];
    for (std::size_t p = 0; p < cache.mask.keep; ++p) {
      const double gr = g_filtered.re(p, d);
      const double gi = g_filtered.im(p, d);
      params.grad_v[p] += gr * cache.derived.re(perm[p], d) + gi * cache.derived.im(perm[p], d);
      g_derived.re(perm[p], d) = params.v[p] * gr;
      g_derived.im(perm[p], d) = params.v[p] * gi;
    }
  }

  spectral::scale_by_factors(g_derived, factors, false, true);
  return plan.forward_adjoint(g_derived);
}

std::pair<RealSeries, ModelCache> model_forward(const RealSeries& x, const ModelParams& params) {
  const auto& cfg = params.config;
  require(x.length() == cfg.lookback, ErrorKind::kShape,
          "model_forward: input has " + std::to_string(x.length()) + " rows, lookback is " +
              std::to_string(cfg.lookback));
  const std::size_t channels = x.channels();
  const std::size_t lookback = cfg.lookback;
  const std::size_t n_branches = params.branches.size();
  const std::size_t hidden = params.fusion.b1.size();
  const std::size_t horizon = params.fusion.b2.size();

  const spectral::DftPlan plan(lookback);
  ModelCache cache;
  cache.lookback = lookback;
  cache.horizon = horizon;
  cache.features = Matrix(channels, n_branches * lookback);
  for (std::size_t b = 0; b < n_branches; ++b) {
    auto [out, bc] = branch_forward(x, params.branches[b], cfg.mask_span(), plan);
    for (std::size_t d = 0; d < channels; ++d) {
      for (std::size_t t = 0; t < lookback; ++t) cache.features(d, b * lookback + t) = out(t, d);
    }
    cache.branches.push_back(std::move(bc));
  }

  const auto& f = params.fusion;
  cache.pre_activation = Matrix(channels, hidden);
  cache.hidden = Matrix(channels, hidden);
  RealSeries y(horizon, channels);
  for (std::size_t d = 0; d < channels; ++d) {
    const auto z = cache.features.row(d);
    for (std::size_t u = 0; u < hidden; ++u) {
      const auto w = f.w1.row(u);
      const double a = std::inner_product(w.begin(), w.end(), z.begin(), f.b1[u]);
      cache.pre_activation(d, u) = a;
      cache.hidden(d, u) = a > 0.0 ? a : 0.0;
    }
    const auto hrow = cache.hidden.row(d);
    for (std::size_t o = 0; o < horizon; ++o) {
      const auto w = f.w2.row(o);
      y(o, d) = std::inner_product(w.begin(), w.end(), hrow.begin(), f.b2[o]);
    }
  }
  return {std::move(y), std::move(cache)};
}

RealSeries model_backward(ModelParams& params, const ModelCache& cache, const RealSeries& grad_out) {
  const std::size_t channels = cache.features.rows();
  require(grad_out.length() == cache.horizon && grad_out.channels() == channels, ErrorKind::kShape,
          "model_backward: gradient is " + std::to_string(grad_out.length()) + "x" +
              std::to_string(grad_out.channels()) + ", forward produced " +
              std::to_string(cache.horizon) + "x" + std::to_string(channels));
  require(cache.branches.size() == params.branches.size(), ErrorKind::kShape,
          "model_backward: cache branch count does not match parameters");
  auto& f = params.fusion;
  const std::size_t hidden = f.b1.size();
  const std::size_t inputs = cache.features.cols();
  const std::size_t lookback = cache.lookback;

  Matrix g_features(channels, inputs);
  std::vector<double> g_pre(hidden);
  for (std::size_t d = 0; d < channels; ++d) {
    const auto hrow = cache.hidden.row(d);
    std::fill(g_pre.begin(), g_pre.end(), 0.0);
    for (std::size_t o = 0; o < cache.horizon; ++o) {
      const double g = grad_out(o, d);
      if (g == 0.0) continue;
      f.grad_b2[o] += g;
      auto gw = f.grad_w2.row(o);
      const auto w = f.w2.row(o);
      for (std::size_t u = 0; u < hidden; ++u) {
        gw[u] += g * hrow[u];
        g_pre[u] += g * w[u];
      }
    }
    const auto z = cache.features.row(d);
    auto gz = g_features.row(d);
    for (std::size_t u = 0; u < hidden; ++u) {
      if (cache.pre_activation(d, u) <= 0.0) continue;
      const double g = g_pre[u];
      f.grad_b1[u] += g;
      auto gw = f.grad_w1.row(u);
      const auto w = f.w1.row(u);
      for (std::size_t c = 0; c < inputs; ++c) {
        gw[c] += g * z[c];
        gz[c] += g * w[c];
      }
    }
  }

  const spectral::DftPlan plan(lookback);
  RealSeries grad_x(lookback, channels);
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    RealSeries g_branch(lookback, channels);
    for (std::size_t d = 0; d < channels; ++d) {
      for (std::size_t t = 0; t < lookback; ++t) g_branch(t, d) = g_features(d, b * lookback + t);
    }
    const RealSeries gx = branch_backward(params.branches[b], cache.branches[b], g_branch, plan);
    auto dst = grad_x.values().flat();
    const auto src = gx.values().flat();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return grad_x;
}

}  // namespace derits::model
