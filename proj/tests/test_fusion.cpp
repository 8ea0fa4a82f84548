#include <doctest.h>

#include <cmath>
#include <random>

#include "mipseg/fusion.hpp"
#include "oracles.hpp"

using namespace mipseg;

namespace {

Mip2D index_map(int w, int h, int depth, std::vector<std::int32_t> idx) {
  Mip2D m;
  m.width = w;
  m.height = h;
  m.axis = Axis::kZ;
  m.source_dims = {w, h, depth};
  m.intensity.assign(static_cast<std::size_t>(w) * h, 0.0f);
  m.index = std::move(idx);
  return m;
}

IndexMapLevel level0(int w, int h, int depth, std::vector<std::int32_t> idx) {
  return downscale_index(index_map(w, h, depth, std::move(idx)), 0);
}

FeatureGrid3D random_features(std::mt19937_64& rng, int c, int w, int h, int d) {
  FeatureGrid3D f(c, w, h, d);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : f.values) v = u(rng);
  return f;
}

// output(c, x, y) = f3d(c, x, y, idx(x, y)) with the layout spelled out.
float gather_ref(const FeatureGrid3D& f, const IndexMapLevel& idx, int c, int x, int y) {
  const std::size_t d = static_cast<std::size_t>(idx.index[static_cast<std::size_t>(y) * idx.width + x]);
  const std::size_t off =
      x + static_cast<std::size_t>(f.width) *
              (y + static_cast<std::size_t>(f.height) * (d + static_cast<std::size_t>(f.depth) * c));
  return f.values[off];
}

void check_gather(const FeatureGrid3D& f, const IndexMapLevel& idx) {
  const FeatureGrid2D out = feature_retrieve(f, idx);
  REQUIRE(out.channels == f.channels);
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) REQUIRE(out.at(c, x, y) == gather_ref(f, idx, c, x, y));
}

double loss3d_ref(const std::vector<double>& p, const std::vector<Index>& sf,
                  const std::vector<Index>& sp, const std::vector<Index>& sb) {
  auto clamp = [](double q) { return std::min(std::max(q, 1e-7), 1 - 1e-7); };
  auto term = [&](const std::vector<Index>& s, bool fg) {
    if (s.empty()) return 0.0;
    long double sum = 0;
    for (Index i : s) sum += -std::log(fg ? clamp(p[i]) : 1 - clamp(p[i]));
    return static_cast<double>(sum / s.size());
  };
  return term(sf, true) + term(sp, true) + term(sb, false);
}

}  // namespace

TEST_CASE("downscale_index: level 0 is the identity; 7 becomes 3 at level 1") {
  const Mip2D m = index_map(2, 2, 8, {7, 0, 3, 5});
  const IndexMapLevel l0 = downscale_index(m, 0);
  CHECK(l0.index == m.index);
  CHECK(l0.depth == 8);
  const IndexMapLevel l1 = downscale_index(m, 1);
  CHECK(l1.width == 1);
  CHECK(l1.height == 1);
  CHECK(l1.depth == 4);
  CHECK(l1.index == std::vector<std::int32_t>{3});
}

TEST_CASE("downscale_index: level range and divisibility are validated") {
  const Mip2D m = index_map(4, 4, 8, std::vector<std::int32_t>(16, 0));
  for (int bad : {-1, 4}) {
    try {
      downscale_index(m, bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kOutOfRange);
    }
  }
  CHECK_THROWS_AS(downscale_index(index_map(3, 4, 8, std::vector<std::int32_t>(12, 0)), 1), Error);
}

TEST_CASE("downscale_index: equals the sampled floor-divide definition") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 16, h = 8, depth = 5 + trial % 20;
    std::uniform_int_distribution<int> d(0, depth - 1);
    std::vector<std::int32_t> idx(w * h);
    for (auto& v : idx) v = d(rng);
    const Mip2D m = index_map(w, h, depth, idx);
    for (int level = 0; level <= 3; ++level) {
      const int f = 1 << level;
      const IndexMapLevel out = downscale_index(m, level);
      REQUIRE(out.width == w / f);
      const int dl = std::max(1, depth / f);
      REQUIRE(out.depth == dl);
      for (int y = 0; y < h / f; ++y)
        for (int x = 0; x < w / f; ++x) {
          const int want = std::min(idx[(y * f) * w + x * f] / f, dl - 1);
          REQUIRE(out.at(x, y) == want);
        }
    }
  }
}

TEST_CASE("gather: constant index d picks slice d; per-pixel indices pick per pixel") {
  FeatureGrid3D f(2, 2, 1, 3);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = static_cast<float>(i);
  const FeatureGrid2D out = feature_retrieve(f, level0(2, 1, 3, {2, 0}));
  // value(c, x, y, d) = ((c * 3 + d) * 1 + y) * 2 + x
  CHECK(out.at(0, 0, 0) == 4.0f);
  CHECK(out.at(0, 1, 0) == 1.0f);
  CHECK(out.at(1, 0, 0) == 10.0f);
  CHECK(out.at(1, 1, 0) == 7.0f);
}

TEST_CASE("gather: index outside the depth or wrong spatial dims is rejected") {
  FeatureGrid3D f(1, 2, 2, 3);
  IndexMapLevel idx = level0(2, 2, 3, {0, 1, 2, 0});
  idx.index[3] = 3;
  try {
    feature_retrieve(f, idx);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfRange);
  }
  CHECK_THROWS_AS(feature_retrieve(f, level0(1, 2, 3, {0, 0})), Error);
}

TEST_CASE("gather: exhaustive over C <= 3 and every shape up to 6x6x6") {
  std::mt19937_64 rng(32);
  for (int c = 1; c <= 3; ++c)
    for (int w = 1; w <= 6; ++w)
      for (int h = 1; h <= 6; ++h)
        for (int d = 1; d <= 6; ++d) {
          const FeatureGrid3D f = random_features(rng, c, w, h, d);
          // Every constant slice, then a random per-pixel map.
          for (int k = 0; k < d; ++k) check_gather(f, level0(w, h, d, std::vector<std::int32_t>(w * h, k)));
          std::uniform_int_distribution<int> pick(0, d - 1);
          std::vector<std::int32_t> idx(w * h);
          for (auto& v : idx) v = pick(rng);
          check_gather(f, level0(w, h, d, idx));
        }
}

TEST_CASE("gather: randomized C=16 at 64^3") {
  std::mt19937_64 rng(33);
  const FeatureGrid3D f = random_features(rng, 16, 64, 64, 64);
  std::uniform_int_distribution<int> pick(0, 63);
  std::vector<std::int32_t> idx(64 * 64);
  for (auto& v : idx) v = pick(rng);
  check_gather(f, level0(64, 64, 64, idx));
}

TEST_CASE("feature grid: stacked volume round-trip") {
  std::mt19937_64 rng(34);
  const FeatureGrid3D f = random_features(rng, 3, 4, 5, 6);
  const ScalarVolume v = f.to_volume();
  CHECK(v.dims() == Dims{4, 5, 18});
  const FeatureGrid3D back = FeatureGrid3D::from_volume(v, 3);
  CHECK(back.values == f.values);
  CHECK(back.depth == 6);
  CHECK_THROWS_AS(FeatureGrid3D::from_volume(v, 4), Error);
}

TEST_CASE("loss_3d: p = 0.5 everywhere gives 3 ln 2; p = 1 on S_f gives 0 for that term") {
  const Dims d{4, 1, 1};
  const ProbabilityVolume half(d, {}, std::vector<float>(4, 0.5f));
  const Loss3D l = loss_3d(half, VoxelSet({0}), VoxelSet({1}), VoxelSet({2, 3}));
  CHECK(l.value == doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));
  const ProbabilityVolume one(d, {}, std::vector<float>{1.0f, 0.5f, 0.0f, 0.0f});
  const Loss3D l1 = loss_3d(one, VoxelSet({0}), VoxelSet(), VoxelSet({2, 3}));
  CHECK(l1.foreground == doctest::Approx(-std::log(1 - 1e-7)).epsilon(1e-9));
  CHECK(l1.background == doctest::Approx(-std::log(1 - 1e-7)).epsilon(1e-9));
  CHECK(l1.warnings.size() == 1);
  // Clamping keeps log(0) finite.
  const Loss3D l2 = loss_3d(one, VoxelSet({2}), VoxelSet(), VoxelSet());
  CHECK(l2.value == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("loss_3d: value matches a direct sum; gradient matches central differences") {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  std::bernoulli_distribution pick(0.3);
  const Dims d{5, 4, 3};
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> p(d.size());
    for (auto& v : p) v = u(rng);
    std::vector<Index> sf, sp, sb;
    for (Index i = 0; i < d.size(); ++i) {
      if (pick(rng)) sf.push_back(i);
      if (pick(rng)) sp.push_back(i);
      if (pick(rng)) sb.push_back(i);
    }
    const ProbabilityVolume prob(d, {}, p);
    const Loss3D l = loss_3d(prob, VoxelSet(sf), VoxelSet(sp), VoxelSet(sb), true);
    std::vector<double> pd(p.begin(), p.end());
    REQUIRE(std::fabs(l.value - loss3d_ref(pd, sf, sp, sb)) < 1e-12);
    for (Index i = 0; i < d.size(); ++i) {
      if (l.gradient[i] == 0.0) continue;
      // Step through float-representable probabilities, divide by the actual step.
      std::vector<float> plus = p, minus = p;
      plus[i] = static_cast<float>(p[i] + 1e-5);
      minus[i] = static_cast<float>(p[i] - 1e-5);
      const double step = static_cast<double>(plus[i]) - minus[i];
      const double fp = loss_3d(ProbabilityVolume(d, {}, plus), VoxelSet(sf), VoxelSet(sp), VoxelSet(sb)).value;
      const double fm = loss_3d(ProbabilityVolume(d, {}, minus), VoxelSet(sf), VoxelSet(sp), VoxelSet(sb)).value;
      const double fd = (fp - fm) / step;
      REQUIRE(std::fabs(fd - l.gradient[i]) / std::fabs(l.gradient[i]) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("dice: perfect prediction is 0, empty both is 0, disjoint is near 1") {
  Mask2D y(2, 2);
  y.bits = {1, 0, 1, 0};
  CHECK(dice_loss({2, 2, {1, 0, 1, 0}}, y).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dice_loss({2, 2, {0, 0, 0, 0}}, Mask2D(2, 2)).value == doctest::Approx(0.0));
  CHECK(dice_loss({2, 2, {0, 1, 0, 1}}, y).value == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_THROWS_AS(dice_loss({1, 2, {0, 0}}, y), Error);
}

TEST_CASE("dice: gradient matches central differences with h = 1e-5") {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution bit(0.4);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 6, h = 5;
    Image2D p{w, h, std::vector<double>(w * h)};
    for (auto& v : p.values) v = u(rng);
    Mask2D y(w, h);
    for (auto& b : y.bits) b = bit(rng);
    const DiceLoss l = dice_loss(p, y);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      Image2D plus = p, minus = p;
      plus.values[i] += 1e-5;
      minus.values[i] -= 1e-5;
      const double fd = (dice_loss(plus, y).value - dice_loss(minus, y).value) / 2e-5;
      const double scale = std::max(std::fabs(l.gradient[i]), 1e-6);
      REQUIRE(std::fabs(fd - l.gradient[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("loss_all: lambda 0 drops the 2D term and the total is linear in lambda") {
  CHECK(loss_all(1.5, 0.7, 0.0) == 1.5);
  CHECK(loss_all(1.5, 0.7, 1.0) == doctest::Approx(2.2));
  const double a = loss_all(1.0, 0.3, 2.0) - loss_all(1.0, 0.3, 1.0);
  const double b = loss_all(1.0, 0.3, 3.0) - loss_all(1.0, 0.3, 2.0);
  CHECK(a == doctest::Approx(b));
  CHECK_THROWS_AS(loss_all(1.0, 1.0, -1.0), Error);
  Mask2D y(1, 2);
  y.bits = {1, 0};
  const Loss2D l2 = loss_2d({1, 2, {1, 0}}, {1, 2, {0, 1}}, y);
  CHECK(l2.value == doctest::Approx(l2.projected.value + l2.direct.value));
}
