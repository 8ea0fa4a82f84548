#include "mipseg/distance.hpp"

#include <cmath>
#include <limits>

#include "mipseg/parallel.hpp"

namespace mipseg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of f sampled at positions k * w. Parabolas
// rooted at infinite samples are skipped. Scratch buffers are caller-owned.
void transform_line(std::vector<double>& f, double w, std::vector<double>& out,
                    std::vector<int>& roots, std::vector<double>& bounds) {
  const int n = static_cast<int>(f.size());
  const double w2 = w * w;
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + w2 * q * q;
    double s = -kInf;
    while (k >= 0) {
      const int v = roots[k];
      s = (fq - (f[v] + w2 * v * v)) / (2.0 * w2 * (q - v));
      if (s > bounds[k]) break;
      --k;
    }
    ++k;
    roots[k] = q;
    bounds[k] = k == 0 ? -kInf : s;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (j < k && bounds[j + 1] < q) ++j;
    const double d = w * (q - roots[j]);
    out[q] = d * d + f[roots[j]];
  }
}

void transform_axis(DistanceField& field, int axis, double w) {
  const Dims& dims = field.dims();
  const int n = dims.extent(axis);
  Coord unit{};
  (axis == 0 ? unit.x : axis == 1 ? unit.y : unit.z) = 1;
  const Index stride = dims.linear(unit);
  // Lines are enumerated by the two remaining coordinates.
  const int u_axis = axis == 0 ? 1 : 0;
  const int v_axis = axis == 2 ? 1 : 2;
  const int nu = dims.extent(u_axis);
  const int nv = dims.extent(v_axis);
  parallel_for(static_cast<std::size_t>(nu) * nv, [&](std::size_t l0, std::size_t l1) {
    std::vector<double> f(n), out(n), bounds(n);
    std::vector<int> roots(n);
    for (std::size_t l = l0; l < l1; ++l) {
      Coord c{};
      const int u = static_cast<int>(l % static_cast<std::size_t>(nu));
      const int v = static_cast<int>(l / static_cast<std::size_t>(nu));
      (u_axis == 0 ? c.x : c.y) = u;
      (v_axis == 1 ? c.y : c.z) = v;
      const Index base = dims.linear(c);
      for (int q = 0; q < n; ++q) f[q] = field[base + q * stride];
      transform_line(f, w, out, roots, bounds);
      for (int q = 0; q < n; ++q) field[base + q * stride] = out[q];
    }
  }, 64);
}

}  // namespace

DistanceField squared_distance_to_set(Dims dims, const VoxelSet& set, Spacing spacing) {
  if (set.empty()) throw Error(ErrorCode::kEmptySet, "distance to an empty set is undefined");
  DistanceField field(dims, spacing, kInf);
  for (Index i : set) {
    if (i >= field.size()) throw Error(ErrorCode::kOutOfRange, "set voxel outside volume");
    field[i] = 0.0;
  }
  for (int axis = 0; axis < 3; ++axis) transform_axis(field, axis, spacing.along(axis));
  return field;
}

DistanceField distance_to_set(Dims dims, const VoxelSet& set, Spacing spacing) {
  DistanceField field = squared_distance_to_set(dims, set, spacing);
  for (auto& v : field.values()) v = std::sqrt(v);
  return field;
}

}  // namespace mipseg
