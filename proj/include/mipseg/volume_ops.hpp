#pragma once

#include <algorithm>

#include "mipseg/grid.hpp"

namespace mipseg {

// Per-volume min-max rescale to [0,1].
ScalarVolume normalize_intensity(const ScalarVolume& volume);

// Where the odd voxel goes when the size difference along an axis is odd.
enum class CenterPolicy { kExtraAfter, kExtraBefore };

// Source coordinate = destination coordinate + offset along one axis.
// Positive when cropping, negative when padding.
int center_offset(int from, int to, CenterPolicy policy);

// Center crop where the target is smaller, symmetric zero pad where it is
// larger. Padding is T{}, which for Label is kBackground.
template <class T>
Grid<T> crop_or_pad(const Grid<T>& v, Dims target, CenterPolicy policy = CenterPolicy::kExtraAfter) {
  validate_dims(target);
  Grid<T> out(target, v.spacing(), T{});
  const int ox = center_offset(v.dims().nx, target.nx, policy);
  const int oy = center_offset(v.dims().ny, target.ny, policy);
  const int oz = center_offset(v.dims().nz, target.nz, policy);
  for (int z = 0; z < target.nz; ++z) {
    const int sz = z + oz;
    if (sz < 0 || sz >= v.dims().nz) continue;
    for (int y = 0; y < target.ny; ++y) {
      const int sy = y + oy;
      if (sy < 0 || sy >= v.dims().ny) continue;
      for (int x = 0; x < target.nx; ++x) {
        const int sx = x + ox;
        if (sx < 0 || sx >= v.dims().nx) continue;
        out.at(x, y, z) = v.at(sx, sy, sz);
      }
    }
  }
  return out;
}

inline ProbabilityVolume crop_or_pad(const ProbabilityVolume& v, Dims target,
                                     CenterPolicy policy = CenterPolicy::kExtraAfter) {
  return ProbabilityVolume(crop_or_pad(static_cast<const Grid<float>&>(v), target, policy));
}

}  // namespace mipseg
