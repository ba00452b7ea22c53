#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "derits/error.hpp"
#include "derits/model.hpp"
#include "derits/spectral.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace derits;
using namespace derits::model;
using Catch::Matchers::WithinAbs;

namespace {

oracle::Branch to_oracle(const BranchParams& b) {
  oracle::Branch o{b.order, b.v, oracle::CMat(b.bins(), oracle::CVec(b.bins()))};
  for (std::size_t i = 0; i < b.bins(); ++i) {
    for (std::size_t j = 0; j < b.bins(); ++j) o.w[i][j] = {b.w_re(i, j), b.w_im(i, j)};
  }
  return o;
}

oracle::Mlp to_oracle(const FusionParams& f) {
  oracle::Mlp m;
  for (std::size_t u = 0; u < f.w1.rows(); ++u) {
    m.w1.emplace_back(f.w1.row(u).begin(), f.w1.row(u).end());
  }
  for (std::size_t o = 0; o < f.w2.rows(); ++o) {
    m.w2.emplace_back(f.w2.row(o).begin(), f.w2.row(o).end());
  }
  m.b1 = f.b1;
  m.b2 = f.b2;
  return m;
}

void randomize(ModelParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& ref : parameters(p)) {
    for (double& v : ref.value) v += n(rng);
  }
}

void set_identity(BranchParams& b) {
  std::fill(b.v.begin(), b.v.end(), 1.0);
  b.w_re.fill(0.0);
  b.w_im.fill(0.0);
  for (std::size_t i = 0; i < b.bins(); ++i) b.w_re(i, i) = 1.0;
}

Spectrum random_spectrum(std::mt19937_64& rng, std::size_t length, std::size_t channels) {
  Spectrum s(length, channels);
  std::normal_distribution<double> n;
  for (auto& v : s.re.flat()) v = n(rng);
  for (auto& v : s.im.flat()) v = n(rng);
  return s;
}

bool distinct_amplitudes(const Spectrum& s) {
  for (std::size_t d = 0; d < s.channels(); ++d) {
    std::vector<double> a;
    for (std::size_t i = 0; i < s.bins(); ++i) a.push_back(std::hypot(s.re(i, d), s.im(i, d)));
    std::sort(a.begin(), a.end());
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (a[i] - a[i - 1] < 1e-6) return false;
    }
  }
  return true;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.lookback = 8;
  c.horizon = 4;
  c.channels = 1;
  c.branches = 2;
  c.fusion_hidden = 6;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("mask_keep", "[model][filter]") {
  CHECK(mask_keep(8, 3, 1) == 2);
  CHECK(mask_keep(8, 3, 2) == 4);
  CHECK(mask_keep(8, 3, 3) == 8);
  CHECK(mask_keep(3, 3, 1) == 1);  // 3/4 floors to 0, guarded to 1
  CHECK(mask_keep(33, 2, 1) == 16);
  CHECK(mask_keep(5, 0, 0) == 5);
  CHECK(mask_keep(5, 100, 1) == 1);
}

TEST_CASE("filter_forward examples", "[model][filter]") {
  std::mt19937_64 rng(1);
  const auto x = random_spectrum(rng, 14, 1);  // S = 8
  REQUIRE(x.bins() == 8);
  BranchParams b1(1, 8);
  b1.v = oracle::random_vector(rng, 8, 0.5, 1.5);

  auto [out, mask] = filter_forward(x, b1, 3);
  CHECK(mask.keep == 2);
  std::size_t zeros = 0;
  for (std::size_t p = 0; p < 8; ++p) zeros += (out.re(p, 0) == 0.0 && out.im(p, 0) == 0.0);
  CHECK(zeros == 6);

  BranchParams b3 = b1;
  b3.order = 3;
  auto [full, full_mask] = filter_forward(x, b3, 3);
  CHECK(full_mask.keep == 8);
  const auto perm = oracle::rank_by_amplitude(testing::channel_spectrum(x, 0));
  CHECK(full_mask.permutation[0] == perm);
  for (std::size_t p = 0; p < 8; ++p) {
    CHECK(full.re(p, 0) == b3.v[p] * x.re(perm[p], 0));
    CHECK(full.im(p, 0) == b3.v[p] * x.im(perm[p], 0));
  }

  Spectrum single(14, 1);
  single.re(5, 0) = 0.3;
  single.im(5, 0) = -2.0;
  auto [one, one_mask] = filter_forward(single, b1, 3);
  CHECK(one_mask.permutation[0][0] == 5);
  CHECK(one.re(0, 0) == b1.v[0] * 0.3);
  CHECK(one.im(0, 0) == b1.v[0] * -2.0);
}

TEST_CASE("filter_forward breaks ties by lower bin index", "[model][filter]") {
  Spectrum s(6, 1);  // 4 bins
  s.re(0, 0) = 1.0;
  s.re(1, 0) = 2.0;
  s.im(2, 0) = 2.0;  // same amplitude as bin 1
  s.re(3, 0) = -1.0; // same amplitude as bin 0
  BranchParams b(1, 4);
  std::fill(b.v.begin(), b.v.end(), 1.0);
  auto [out, mask] = filter_forward(s, b, 1);
  CHECK(mask.permutation[0] == std::vector<std::size_t>{1, 2, 0, 3});
}

TEST_CASE("property: mask cardinality", "[model][filter][property]") {
  std::mt19937_64 rng(5);
  for (std::size_t bins : {8u, 16u, 33u}) {
    const std::size_t length = 2 * (bins - 1);
    for (unsigned span = 1; span <= 3; ++span) {
      for (unsigned k = 1; k <= span; ++k) {
        const auto x = random_spectrum(rng, length, 2);
        BranchParams b(k, bins);
        b.v = oracle::random_vector(rng, bins, 0.5, 1.5);
        auto [out, mask] = filter_forward(x, b, span);
        const std::size_t want = std::max<std::size_t>(1, bins / (std::size_t{1} << (span - k)));
        CHECK(mask.keep == want);
        for (std::size_t d = 0; d < 2; ++d) {
          std::size_t zeros = 0;
          for (std::size_t p = 0; p < bins; ++p) zeros += (out.re(p, d) == 0.0 && out.im(p, d) == 0.0);
          CHECK(zeros == bins - want);
        }
      }
    }
  }
}

TEST_CASE("filter_unsort", "[model][filter]") {
  std::mt19937_64 rng(2);
  const auto h = random_spectrum(rng, 10, 2);
  FilterMask identity{6, {{0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}}};
  const auto same = filter_unsort(h, identity);
  CHECK(same.re == h.re);
  CHECK(same.im == h.im);

  BranchParams b(2, 6);
  std::fill(b.v.begin(), b.v.end(), 1.0);
  auto [sorted, mask] = filter_forward(h, b, 2);
  const auto restored = filter_unsort(sorted, mask);
  CHECK(restored.re == h.re);
  CHECK(restored.im == h.im);

  for (int trial = 0; trial < 10; ++trial) {
    FilterMask m{6, {}};
    Spectrum permuted(10, 2);
    for (std::size_t d = 0; d < 2; ++d) {
      std::vector<std::size_t> perm(6);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t p = 0; p < 6; ++p) {
        permuted.re(p, d) = h.re(perm[p], d);
        permuted.im(p, d) = h.im(perm[p], d);
      }
      m.permutation.push_back(perm);
    }
    const auto back = filter_unsort(permuted, m);
    CHECK(back.re == h.re);
    CHECK(back.im == h.im);
  }

  FilterMask bad{6, {{0, 1, 2, 3, 4, 4}, {0, 1, 2, 3, 4, 5}}};
  try {
    filter_unsort(h, bad);
    FAIL("expected corrupted-mask error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kCorruptedMask);
  }
  FilterMask out_of_range{6, {{0, 1, 2, 3, 4, 9}, {0, 1, 2, 3, 4, 5}}};
  CHECK_THROWS_AS(filter_unsort(h, out_of_range), Error);
}

TEST_CASE("fourier_conv examples", "[model][conv]") {
  BranchParams b(1, 2);
  b.w_im(0, 0) = 1.0;  // W = [[j, 0], [0, 1]]
  b.w_re(1, 1) = 1.0;
  const auto out = fourier_conv(testing::make_spectrum({{1, 0}, {0, 1}}, 2), b);
  CHECK(out.re(0, 0) == 0.0);
  CHECK(out.im(0, 0) == 1.0);
  CHECK(out.re(1, 0) == 0.0);
  CHECK(out.im(1, 0) == 1.0);

  std::mt19937_64 rng(3);
  const auto h = random_spectrum(rng, 12, 3);
  BranchParams id(1, 7);
  set_identity(id);
  const auto same = fourier_conv(h, id);
  CHECK(same.re == h.re);
  CHECK(same.im == h.im);

  BranchParams zero(1, 7);
  const auto z = fourier_conv(h, zero);
  for (double v : z.re.flat()) CHECK(v == 0.0);
  for (double v : z.im.flat()) CHECK(v == 0.0);

  try {
    fourier_conv(random_spectrum(rng, 4, 1), id);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("branch_forward", "[model][branch]") {
  std::mt19937_64 rng(4);
  for (unsigned k : {0u, 1u, 2u, 3u}) {
    const auto x = testing::random_series(rng, 16, 2);
    BranchParams b(k, 9);
    set_identity(b);
    auto [out, cache] = branch_forward(x, b, k);  // span == k keeps every bin
    CHECK(cache.mask.keep == 9);
    CHECK(testing::max_relative_error(out, x) < 1e-9);
  }

  BranchParams b(1, 9);
  b.v = oracle::random_vector(rng, 9);
  auto [zero_out, zc] = branch_forward(RealSeries(16, 2), b, 2);
  for (double v : zero_out.values().flat()) CHECK(v == 0.0);

  // Random parameters against the step-by-step oracle; L=16, D=2, K=2, k=1.
  b.v = oracle::random_vector(rng, 9, 0.5, 1.5);
  for (auto& w : b.w_re.flat()) w = std::normal_distribution<double>(0, 0.5)(rng);
  for (auto& w : b.w_im.flat()) w = std::normal_distribution<double>(0, 0.5)(rng);
  const auto x = testing::random_series(rng, 16, 2);
  auto [out, cache] = branch_forward(x, b, 2);
  const auto ob = to_oracle(b);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto ref = oracle::branch(x.channel(d), ob, 2);
    CHECK(oracle::max_abs_diff(out.channel(d), ref) < 1e-10 * std::max(1.0, oracle::max_abs(ref)));
  }
}

TEST_CASE("model_forward", "[model][forward]") {
  SECTION("single branch with identity fusion passes the branch through") {
    ModelConfig c;
    c.lookback = 12;
    c.horizon = 12;
    c.branches = 1;
    c.fusion_hidden = 24;
    ModelParams p = zero_params(c);
    p.branches[0].v = std::vector<double>(7, 1.0);
    std::mt19937_64 rng(6);
    for (auto& w : p.branches[0].w_re.flat()) w = std::normal_distribution<double>(0, 0.3)(rng);
    // relu(z) - relu(-z) = z
    for (std::size_t t = 0; t < 12; ++t) {
      p.fusion.w1(t, t) = 1.0;
      p.fusion.w1(12 + t, t) = -1.0;
      p.fusion.w2(t, t) = 1.0;
      p.fusion.w2(t, 12 + t) = -1.0;
    }
    const auto x = testing::random_series(rng, 12, 3);
    const auto [y, cache] = model_forward(x, p);
    const auto [branch_out, bc] = branch_forward(x, p.branches[0], 1);
    CHECK(testing::max_relative_error(y, branch_out) < 1e-12);
  }

  SECTION("zero fusion weights give the output bias") {
    ModelConfig c = tiny_config();
    ModelParams p = init_params(c);
    p.fusion.w1.fill(0.0);
    p.fusion.w2.fill(0.0);
    p.fusion.b2 = {0.5, -1.0, 2.0, 0.25};
    std::mt19937_64 rng(7);
    const auto [y, cache] = model_forward(testing::random_series(rng, 8, 2), p);
    for (std::size_t d = 0; d < 2; ++d) {
      for (std::size_t h = 0; h < 4; ++h) CHECK(y(h, d) == p.fusion.b2[h]);
    }
  }

  SECTION("K=2 composition matches the oracle") {
    ModelConfig c;
    c.lookback = 8;
    c.horizon = 4;
    c.branches = 2;
    c.seed = 11;
    ModelParams p = init_params(c);
    randomize(p, 12);
    std::mt19937_64 rng(13);
    const auto x = testing::random_series(rng, 8, 1);
    const auto [y, cache] = model_forward(x, p);
    std::vector<double> z;
    for (const auto& b : p.branches) {
      const auto part = oracle::branch(x.channel(0), to_oracle(b), 2);
      z.insert(z.end(), part.begin(), part.end());
    }
    const auto ref = oracle::mlp(z, to_oracle(p.fusion));
    CHECK(oracle::max_abs_diff(y.channel(0), ref) < 1e-10 * std::max(1.0, oracle::max_abs(ref)));
  }

  SECTION("wrong lookback is a shape error") {
    ModelParams p = init_params(tiny_config());
    CHECK_THROWS_AS(model_forward(RealSeries(9, 1), p), Error);
  }
}

TEST_CASE("model_backward basics", "[model][backward]") {
  ModelParams p = init_params(tiny_config());
  randomize(p, 1);
  std::mt19937_64 rng(21);
  const auto x = testing::random_series(rng, 8, 2);
  const auto [y, cache] = model_forward(x, p);

  zero_grad(p);
  const auto gx0 = model_backward(p, cache, RealSeries(4, 2));
  for (const auto& ref : parameters(p)) {
    for (double g : ref.grad) CHECK(g == 0.0);
  }
  for (double g : gx0.values().flat()) CHECK(g == 0.0);

  const auto g = testing::random_series(rng, 4, 2);
  RealSeries g2 = g;
  for (double& v : g2.values().flat()) v *= 2.0;
  zero_grad(p);
  model_backward(p, cache, g);
  std::vector<std::vector<double>> once;
  for (const auto& ref : parameters(p)) once.emplace_back(ref.grad.begin(), ref.grad.end());
  zero_grad(p);
  model_backward(p, cache, g2);
  auto refs = parameters(p);
  for (std::size_t t = 0; t < refs.size(); ++t) {
    for (std::size_t i = 0; i < once[t].size(); ++i) {
      CHECK_THAT(refs[t].grad[i], WithinAbs(2.0 * once[t][i], 1e-12 * std::max(1.0, std::abs(once[t][i]))));
    }
  }

  // Accumulation: a second call adds.
  model_backward(p, cache, g);
  refs = parameters(p);
  for (std::size_t t = 0; t < refs.size(); ++t) {
    for (std::size_t i = 0; i < once[t].size(); ++i) {
      CHECK_THAT(refs[t].grad[i], WithinAbs(3.0 * once[t][i], 1e-12 * std::max(1.0, std::abs(once[t][i]))));
    }
  }

  CHECK_THROWS_AS(model_backward(p, cache, RealSeries(5, 2)), Error);
  CHECK_THROWS_AS(model_backward(p, cache, RealSeries(4, 1)), Error);
}

TEST_CASE("model_backward matches central differences", "[model][backward][gradcheck]") {
  ModelParams p = init_params(tiny_config());
  randomize(p, 3);
  std::mt19937_64 rng(31);
  RealSeries x = testing::random_series(rng, 8, 1);
  for (const auto& b : p.branches) {
    REQUIRE(distinct_amplitudes(spectral::fdt(x, b.order)));
  }
  const auto weights = testing::random_series(rng, 4, 1);
  auto objective = [&]() {
    const auto y = model_forward(x, p).first;
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += weights(i, 0) * y(i, 0);
    return s;
  };

  zero_grad(p);
  const auto [y, cache] = model_forward(x, p);
  const auto gx = model_backward(p, cache, weights);

  for (auto& ref : parameters(p)) {
    double diff = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < ref.value.size(); ++i) {
      const double numeric = oracle::central_difference(objective, ref.value[i], 1e-5);
      diff = std::max(diff, std::abs(numeric - ref.grad[i]));
      scale = std::max(scale, std::abs(numeric));
    }
    INFO(ref.name << " max abs diff " << diff << " scale " << scale);
    CHECK(diff <= 1e-4 * std::max(scale, 1e-12));
  }

  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t t = 0; t < 8; ++t) {
    const double numeric = oracle::central_difference(objective, x(t, 0), 1e-5);
    diff = std::max(diff, std::abs(numeric - gx(t, 0)));
    scale = std::max(scale, std::abs(numeric));
  }
  CHECK(diff <= 1e-4 * scale);
}

TEST_CASE("property: channel independence", "[model][property]") {
  ModelConfig c = tiny_config();
  c.lookback = 10;
  c.horizon = 3;
  ModelParams p = init_params(c);
  randomize(p, 5);
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = testing::random_series(rng, 10, 4);
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    RealSeries xp(10, 4);
    for (std::size_t t = 0; t < 10; ++t) {
      for (std::size_t d = 0; d < 4; ++d) xp(t, d) = x(t, perm[d]);
    }
    const auto y = model_forward(x, p).first;
    const auto yp = model_forward(xp, p).first;
    for (std::size_t h = 0; h < 3; ++h) {
      for (std::size_t d = 0; d < 4; ++d) CHECK(yp(h, d) == y(h, perm[d]));
    }
  }
}

TEST_CASE("property: scaling the input keeps sort permutations", "[model][property]") {
  ModelParams p = init_params(tiny_config());
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = testing::random_series(rng, 8, 2);
    RealSeries x2 = x;
    for (double& v : x2.values().flat()) v *= 2.0;
    const auto c1 = model_forward(x, p).second;
    const auto c2 = model_forward(x2, p).second;
    for (std::size_t b = 0; b < c1.branches.size(); ++b) {
      if (!distinct_amplitudes(c1.branches[b].derived)) continue;
      CHECK(c1.branches[b].mask.permutation == c2.branches[b].mask.permutation);
    }
  }
}

TEST_CASE("init_params", "[model]") {
  ModelConfig c = tiny_config();
  const auto a = init_params(c);
  const auto b = init_params(c);
  REQUIRE(a.branches.size() == 2);
  CHECK(a.branches[0].order == 1);
  CHECK(a.branches[1].order == 2);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.branches[0].v[i] >= 0.9);
    CHECK(a.branches[0].v[i] <= 1.1);
  }
  CHECK(a.fusion.w1 == b.fusion.w1);
  CHECK(a.branches[1].w_im == b.branches[1].w_im);
  for (double v : a.fusion.b1) CHECK(v == 0.0);
  CHECK(a.fusion.w1.rows() == 6);
  CHECK(a.fusion.w1.cols() == 16);

  c.ablation_order = 0;
  const auto abl = init_params(c);
  REQUIRE(abl.branches.size() == 1);
  CHECK(abl.branches[0].order == 0);
  CHECK(c.mask_span() == 0);

  ModelConfig defaults;
  defaults.horizon = 24;
  CHECK(defaults.hidden_width() == 96);
}
