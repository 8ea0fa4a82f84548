#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "mipseg/grid.hpp"

namespace mipseg {

enum class Axis { kX = 0, kY = 1, kZ = 2 };

Axis parse_axis(std::string_view s);
const char* to_string(Axis axis);

// Pixel (a, b) of a projection along `axis` and depth d map to source voxels:
//   Z: (x, y, z) = (a, b, d)    X: (x, y, z) = (d, a, b)    Y: (x, y, z) = (a, d, b)
Coord source_coord(Axis axis, int a, int b, int depth);
// Inverse of source_coord: the projection pixel (a, b) a voxel falls on.
std::pair<int, int> projected_pixel(Axis axis, const Coord& c);
// Projection image width/height for a source grid.
int projection_width(Axis axis, const Dims& source);
int projection_height(Axis axis, const Dims& source);

// Maximum intensity projection plus the argmax depth of every pixel.
// Pixel (a, b) is stored at a + width * b.
struct Mip2D {
  int width = 0;
  int height = 0;
  Axis axis = Axis::kZ;
  Dims source_dims;
  std::vector<float> intensity;
  std::vector<std::int32_t> index;

  std::size_t pixel(int a, int b) const {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(width) * static_cast<std::size_t>(b);
  }
  int depth_extent() const { return source_dims.extent(static_cast<int>(axis)); }
};

struct Mask2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask2D() = default;
  Mask2D(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t pixel(int a, int b) const {
    return static_cast<std::size_t>(a) + static_cast<std::size_t>(width) * static_cast<std::size_t>(b);
  }
  std::size_t popcount() const;

  friend bool operator==(const Mask2D&, const Mask2D&) = default;
};

// Ties along the ray resolve to the smallest depth index.
Mip2D mip_project(const ScalarVolume& volume, Axis axis = Axis::kZ);

// Projection of a binary volume (pixel set iff any voxel on the ray is set).
Mask2D project_mask(const BinaryVolume& mask, Axis axis = Axis::kZ);

// Lifts annotated pixels to the voxel their ray maximum came from.
VoxelSet back_project(const Mask2D& annotation, const Mip2D& mip);

// 16-bit grayscale PNG; intensity clamped to [0,1] and scaled to [0,65535].
void export_png(const Mip2D& mip, const std::filesystem::path& path);
// Reads a 16-bit grayscale PNG back to [0,1] intensities (row-major, a fastest).
std::vector<float> import_intensity_png(const std::filesystem::path& path, int& width, int& height);

// 8-bit grayscale PNG, nonzero pixel means vessel.
Mask2D import_mask_png(const std::filesystem::path& path, int expected_width, int expected_height);
// 8-bit grayscale PNG with 255 for vessel pixels.
void export_mask_png(const Mask2D& mask, const std::filesystem::path& path);

}  // namespace mipseg
