#pragma once

#include "mipseg/grid.hpp"

namespace mipseg {

using DistanceField = Grid<double>;

// Exact Euclidean distance from every voxel to the nearest member of `set`,
// computed with one separable lower-envelope pass per axis. Distances are in
// units of `spacing` (voxel units by default).
DistanceField distance_to_set(Dims dims, const VoxelSet& set, Spacing spacing = {});

// Same, squared. Avoids the final sqrt when only comparisons are needed.
DistanceField squared_distance_to_set(Dims dims, const VoxelSet& set, Spacing spacing = {});

}  // namespace mipseg
