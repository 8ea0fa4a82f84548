#include <doctest.h>

#include <cmath>
#include <random>

#include "mipseg/distance.hpp"
#include "oracles.hpp"

using namespace mipseg;

TEST_CASE("distance: member is 0, axis neighbor 1, body diagonal sqrt(3)") {
  const Dims d{5, 5, 5};
  const Index center = d.linear(2, 2, 2);
  const DistanceField f = distance_to_set(d, VoxelSet({center}));
  CHECK(f[center] == 0.0);
  CHECK(f.at(3, 2, 2) == 1.0);
  CHECK(f.at(2, 1, 2) == 1.0);
  CHECK(f.at(3, 3, 3) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("distance: empty set is an error") {
  try {
    distance_to_set({2, 2, 2}, VoxelSet());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptySet);
  }
}

TEST_CASE("distance: random sparse sets on 8^3 match the brute-force scan") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryVolume m = oracle::random_mask(rng, {8, 8, 8}, 0.01 + 0.02 * (trial % 5));
    VoxelSet s = VoxelSet::from_mask(m);
    if (s.empty()) s = VoxelSet({static_cast<Index>(trial)});
    const DistanceField f = distance_to_set(m.dims(), s);
    const auto ref = oracle::distance_field(m.dims(), s.indices());
    for (Index i = 0; i < ref.size(); ++i) REQUIRE(std::fabs(f[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("distance: exhaustive-size sweep up to 12^3 with anisotropic spacing") {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> e(1, 12);
  std::uniform_real_distribution<double> sp(0.3, 2.5);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d{e(rng), e(rng), e(rng)};
    const Spacing s = trial % 2 ? Spacing{} : Spacing{sp(rng), sp(rng), sp(rng)};
    const BinaryVolume m = oracle::random_mask(rng, d, 0.05);
    VoxelSet set = VoxelSet::from_mask(m);
    if (set.empty()) set = VoxelSet({d.size() - 1});
    const DistanceField f = distance_to_set(d, set, s);
    const auto ref = oracle::distance_field(d, set.indices(), s);
    for (Index i = 0; i < ref.size(); ++i) REQUIRE(std::fabs(f[i] - ref[i]) < 1e-9);
    const DistanceField sq = squared_distance_to_set(d, set, s);
    for (Index i = 0; i < ref.size(); ++i) REQUIRE(std::fabs(sq[i] - ref[i] * ref[i]) < 1e-9);
  }
}
