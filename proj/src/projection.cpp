#include "mipseg/projection.hpp"

#include <algorithm>
#include <string>

#include "mipseg/parallel.hpp"

namespace mipseg {

Axis parse_axis(std::string_view s) {
  if (s == "x" || s == "X") return Axis::kX;
  if (s == "y" || s == "Y") return Axis::kY;
  if (s == "z" || s == "Z") return Axis::kZ;
  throw Error(ErrorCode::kInvalidArgument, "axis must be x, y or z, got '" + std::string(s) + "'");
}

const char* to_string(Axis axis) {
  switch (axis) {
    case Axis::kX: return "x";
    case Axis::kY: return "y";
    case Axis::kZ: return "z";
  }
  return "?";
}

Coord source_coord(Axis axis, int a, int b, int depth) {
  switch (axis) {
    case Axis::kX: return {depth, a, b};
    case Axis::kY: return {a, depth, b};
    case Axis::kZ: return {a, b, depth};
  }
  return {};
}

std::pair<int, int> projected_pixel(Axis axis, const Coord& c) {
  switch (axis) {
    case Axis::kX: return {c.y, c.z};
    case Axis::kY: return {c.x, c.z};
    case Axis::kZ: return {c.x, c.y};
  }
  return {};
}

int projection_width(Axis axis, const Dims& s) { return axis == Axis::kX ? s.ny : s.nx; }

int projection_height(Axis axis, const Dims& s) { return axis == Axis::kZ ? s.ny : s.nz; }

std::size_t Mask2D::popcount() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto v) { return v != 0; }));
}

namespace {

// Calls fn(pixel, a, b, base, stride) for every projection pixel, where the
// ray's voxels are base + k * stride for k in [0, depth).
template <class Fn>
void for_each_ray(const Dims& dims, Axis axis, Fn&& fn) {
  const int w = projection_width(axis, dims);
  const int h = projection_height(axis, dims);
  const Coord step = source_coord(axis, 0, 0, 1);
  const auto stride = static_cast<std::ptrdiff_t>(dims.linear(step));
  parallel_for(static_cast<std::size_t>(w) * h, [&](std::size_t p0, std::size_t p1) {
    for (std::size_t p = p0; p < p1; ++p) {
      const int a = static_cast<int>(p % static_cast<std::size_t>(w));
      const int b = static_cast<int>(p / static_cast<std::size_t>(w));
      fn(p, dims.linear(source_coord(axis, a, b, 0)), stride);
    }
  }, 256);
}

}  // namespace

Mip2D mip_project(const ScalarVolume& volume, Axis axis) {
  Mip2D mip;
  mip.axis = axis;
  mip.source_dims = volume.dims();
  mip.width = projection_width(axis, volume.dims());
  mip.height = projection_height(axis, volume.dims());
  const std::size_t n = static_cast<std::size_t>(mip.width) * mip.height;
  mip.intensity.assign(n, 0.0f);
  mip.index.assign(n, 0);
  const int depth = mip.depth_extent();
  for_each_ray(volume.dims(), axis, [&](std::size_t p, Index base, std::ptrdiff_t stride) {
    float best = volume[base];
    std::int32_t arg = 0;
    for (int k = 1; k < depth; ++k) {
      const float v = volume[base + static_cast<Index>(k * stride)];
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    mip.intensity[p] = best;
    mip.index[p] = arg;
  });
  return mip;
}

Mask2D project_mask(const BinaryVolume& mask, Axis axis) {
  Mask2D out(projection_width(axis, mask.dims()), projection_height(axis, mask.dims()));
  const int depth = mask.dims().extent(static_cast<int>(axis));
  for_each_ray(mask.dims(), axis, [&](std::size_t p, Index base, std::ptrdiff_t stride) {
    for (int k = 0; k < depth; ++k) {
      if (mask[base + static_cast<Index>(k * stride)] != 0) {
        out.bits[p] = 1;
        break;
      }
    }
  });
  return out;
}

VoxelSet back_project(const Mask2D& annotation, const Mip2D& mip) {
  if (annotation.width != mip.width || annotation.height != mip.height) {
    throw Error(ErrorCode::kDimsMismatch,
                "annotation is " + std::to_string(annotation.width) + "x" +
                    std::to_string(annotation.height) + " but projection is " +
                    std::to_string(mip.width) + "x" + std::to_string(mip.height));
  }
  std::vector<Index> seeds;
  for (int b = 0; b < mip.height; ++b) {
    for (int a = 0; a < mip.width; ++a) {
      const auto p = mip.pixel(a, b);
      if (annotation.bits[p] == 0) continue;
      seeds.push_back(mip.source_dims.linear(source_coord(mip.axis, a, b, mip.index[p])));
    }
  }
  return VoxelSet(std::move(seeds));
}

}  // namespace mipseg
