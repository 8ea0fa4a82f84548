#pragma once

// Voxel grids shared by every stage of the pipeline.
//
// Memory layout: x is the fastest axis, then y, then z.
//   linear = x + nx * (y + ny * z)
// This matches MetaImage's DimSize ordering, so payloads are written without
// reordering. All modules index through Dims::linear / Dims::coord.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mipseg/error.hpp"

namespace mipseg {

using Index = std::size_t;

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const Coord&, const Coord&) = default;
};

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  bool contains(const Coord& c) const { return contains(c.x, c.y, c.z); }
  Index linear(int x, int y, int z) const {
    return static_cast<Index>(x) +
           static_cast<Index>(nx) *
               (static_cast<Index>(y) + static_cast<Index>(ny) * static_cast<Index>(z));
  }
  Index linear(const Coord& c) const { return linear(c.x, c.y, c.z); }
  Coord coord(Index i) const {
    const auto sx = static_cast<Index>(nx);
    const auto sy = static_cast<Index>(ny);
    return {static_cast<int>(i % sx), static_cast<int>((i / sx) % sy),
            static_cast<int>(i / (sx * sy))};
  }
  int extent(int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double along(int axis) const { return axis == 0 ? sx : axis == 1 ? sy : sz; }

  friend bool operator==(const Spacing&, const Spacing&) = default;
};

void validate_dims(const Dims& dims);
void validate_spacing(const Spacing& spacing);

template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing) {
    validate_dims(dims_);
    validate_spacing(spacing_);
    data_.assign(dims_.size(), fill);
  }
  Grid(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_dims(dims_);
    validate_spacing(spacing_);
    if (data_.size() != dims_.size()) {
      throw Error(ErrorCode::kSizeMismatch, "grid data length does not match dims");
    }
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](Index i) { return data_[i]; }
  const T& operator[](Index i) const { return data_[i]; }
  T& at(int x, int y, int z) { return data_[dims_.linear(x, y, z)]; }
  const T& at(int x, int y, int z) const { return data_[dims_.linear(x, y, z)]; }
  T& at(const Coord& c) { return data_[dims_.linear(c)]; }
  const T& at(const Coord& c) const { return data_[dims_.linear(c)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<T> data_;
};

enum class Label : std::uint8_t { kBackground = 0, kForeground = 1, kUnlabeled = 2 };

using ScalarVolume = Grid<float>;
using LabelVolume = Grid<Label>;
// Nonzero means inside.
using BinaryVolume = Grid<std::uint8_t>;

// Per-voxel foreground probability; background probability is 1 - p.
class ProbabilityVolume : public Grid<float> {
 public:
  ProbabilityVolume() = default;
  ProbabilityVolume(Dims dims, Spacing spacing, std::vector<float> p);
  explicit ProbabilityVolume(Grid<float> grid);

  float fg(Index i) const { return (*this)[i]; }
  float bg(Index i) const { return 1.0f - (*this)[i]; }
};

// Sorted, duplicate-free linear voxel indices.
class VoxelSet {
 public:
  VoxelSet() = default;
  explicit VoxelSet(std::vector<Index> indices);

  static VoxelSet from_mask(const BinaryVolume& mask);
  static VoxelSet where(const LabelVolume& labels, Label label);

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(Index i) const;
  const std::vector<Index>& indices() const { return indices_; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  BinaryVolume to_mask(Dims dims, Spacing spacing = {}) const;

  friend VoxelSet set_union(const VoxelSet& a, const VoxelSet& b);
  friend VoxelSet set_intersection(const VoxelSet& a, const VoxelSet& b);
  friend VoxelSet set_difference(const VoxelSet& a, const VoxelSet& b);
  friend bool operator==(const VoxelSet&, const VoxelSet&) = default;

 private:
  std::vector<Index> indices_;
};

VoxelSet set_union(const VoxelSet& a, const VoxelSet& b);
VoxelSet set_intersection(const VoxelSet& a, const VoxelSet& b);
VoxelSet set_difference(const VoxelSet& a, const VoxelSet& b);

template <class A, class B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    throw Error(ErrorCode::kDimsMismatch, std::string(what) + ": dims mismatch");
  }
}

}  // namespace mipseg
