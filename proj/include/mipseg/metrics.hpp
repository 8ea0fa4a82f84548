#pragma once

#include <cstddef>

#include "mipseg/grid.hpp"

namespace mipseg {

struct MetricReport {
  double dsc = 0;
  double cldice = 0;
  double ahd = 0;  // millimeters
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// 2|A ∩ B| / (|A| + |B|). Both empty is an error.
double dsc(const BinaryVolume& a, const BinaryVolume& b);

// Topology-preserving medial curve by iterative directional thinning:
// border voxels that are 26/6-simple and not curve end points are deleted
// one at a time in a fixed scan order until nothing changes.
BinaryVolume skeletonize(const BinaryVolume& mask);

// Whether deleting the center of a 3x3x3 neighborhood (bit k = voxel
// (k % 3, k / 3 % 3, k / 9) set) preserves topology under 26-connectivity
// for the object and 6-connectivity for the background.
bool is_simple_point(std::uint32_t neighborhood);

// Number of 26-connected components.
std::size_t count_components(const BinaryVolume& mask);

// Harmonic mean of |skel(pred) ∩ gt| / |skel(pred)| and |skel(gt) ∩ pred| / |skel(gt)|.
double cldice(const BinaryVolume& pred, const BinaryVolume& gt);

// (mean_{p in A} d(p, B) + mean_{q in B} d(q, A)) / 2, Euclidean in mm using
// the volume spacing of `a`.
double ahd(const BinaryVolume& a, const BinaryVolume& b);

MetricReport evaluate(const BinaryVolume& pred, const BinaryVolume& gt);

}  // namespace mipseg
