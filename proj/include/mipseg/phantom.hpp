#pragma once

// Synthetic vessel phantoms with exact ground truth, and oracle stand-ins for
// network predictions. Randomness is counter-based (a hash of seed, stream
// and voxel index), so output does not depend on evaluation order.

#include <array>
#include <cstdint>
#include <vector>

#include "mipseg/grid.hpp"

namespace mipseg {

using Point3 = std::array<double, 3>;

struct Tube {
  std::vector<Point3> points;  // polyline control points, voxel coordinates
  std::vector<double> radii;   // one per control point, or a single value
};

struct IntensityRange {
  double lo = 0;
  double hi = 0;
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing;
  std::vector<Tube> tubes;
  IntensityRange vessel{0.8, 1.0};
  IntensityRange background{0.0, 0.3};
  double noise_std = 0.02;
  std::uint64_t seed = 1;

  // Requires background.hi < vessel.lo and every control point inside the grid.
  void validate() const;
};

struct Phantom {
  ScalarVolume volume;
  BinaryVolume ground_truth;
};

// Vessel voxels: distance from the voxel center to some tube segment is at
// most the radius interpolated at the closest point. Intensities are uniform
// in the class range plus Gaussian noise, clamped back into the class range.
Phantom generate_phantom(const PhantomSpec& spec);

// Straight tube through the volume center along the given axis (0, 1, 2).
PhantomSpec straight_tube_spec(Dims dims, int axis, double radius, std::uint64_t seed = 1);
// A trunk that splits into two branches; one 26-connected component.
PhantomSpec y_branch_spec(Dims dims, std::uint64_t seed = 1);
// `count` random polylines with random radii in [1, 3].
PhantomSpec random_tubes_spec(Dims dims, int count, std::uint64_t seed);

struct OracleOutputs {
  ProbabilityVolume clean;
  std::vector<ProbabilityVolume> passes;
};

// clean = quality on ground truth, 1 - quality elsewhere; each pass adds
// Gaussian noise of std `pass_noise` and clamps to [0,1].
OracleOutputs oracle_probabilities(const BinaryVolume& ground_truth, double quality, int passes,
                                   double pass_noise, std::uint64_t seed);

// Counter-based random numbers.
double hash_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);
double hash_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

}  // namespace mipseg
