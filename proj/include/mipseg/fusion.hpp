#pragma once

// 2D-3D feature retrieval and the training losses, as standalone numerical
// primitives. Gradients are with respect to probabilities only.

#include <string>
#include <vector>

#include "mipseg/grid.hpp"
#include "mipseg/projection.hpp"

namespace mipseg {

// C x W x H x D values, channel-major; within a channel x is fastest, then y,
// then depth: value(c, x, y, d) = values[((c * depth + d) * height + y) * width + x].
// On disk this is a MetaImage of DimSize (W, H, C * D).
struct FeatureGrid3D {
  int channels = 0;
  int width = 0;
  int height = 0;
  int depth = 0;
  std::vector<float> values;

  FeatureGrid3D() = default;
  FeatureGrid3D(int c, int w, int h, int d);
  std::size_t offset(int c, int x, int y, int d) const {
    return ((static_cast<std::size_t>(c) * depth + d) * height + y) * width + x;
  }
  float at(int c, int x, int y, int d) const { return values[offset(c, x, y, d)]; }
  void validate() const;

  static FeatureGrid3D from_volume(const ScalarVolume& stacked, int channels);
  ScalarVolume to_volume() const;
};

// value(c, x, y) = values[(c * height + y) * width + x]; on disk DimSize (W, H, C).
struct FeatureGrid2D {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;

  std::size_t offset(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float at(int c, int x, int y) const { return values[offset(c, x, y)]; }

  ScalarVolume to_volume() const;

  friend bool operator==(const FeatureGrid2D&, const FeatureGrid2D&) = default;
};

struct IndexMapLevel {
  int level = 0;
  int width = 0;
  int height = 0;
  int depth = 0;  // valid index values are [0, depth)
  std::vector<std::int32_t> index;

  std::int32_t at(int x, int y) const {
    return index[static_cast<std::size_t>(y) * width + x];
  }
};

inline constexpr int kMaxPyramidLevel = 3;

// Nearest-neighbor spatial downsample by 2^level (sample at (x 2^level,
// y 2^level)), then floor(index / 2^level), clamped to [0, depth / 2^level - 1].
IndexMapLevel downscale_index(const Mip2D& mip, int level);

// output(c, x, y) = f3d(c, x, y, idx(x, y)).
FeatureGrid2D feature_retrieve(const FeatureGrid3D& f3d, const IndexMapLevel& idx);

inline constexpr double kProbabilityClamp = 1e-7;
inline constexpr double kDiceSmoothing = 1e-5;

struct Loss3D {
  double value = 0;
  double foreground = 0;  // over S_f
  double seeds = 0;       // over S_p
  double background = 0;  // over S_b
  std::vector<std::string> warnings;
  Grid<double> gradient;  // dL/dp_fg, filled when requested
};

// -mean_{S_f} log p - mean_{S_p} log p - mean_{S_b} log(1 - p), with p clamped
// to [1e-7, 1 - 1e-7]. An empty set contributes 0 and records a warning.
Loss3D loss_3d(const ProbabilityVolume& prob, const VoxelSet& s_f, const VoxelSet& s_p,
               const VoxelSet& s_b, bool with_gradient = false);

struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

struct DiceLoss {
  double value = 0;
  std::vector<double> gradient;  // d value / d p
};

// 1 - (2 Σ p y + s) / (Σ p + Σ y + s), s = 1e-5.
DiceLoss dice_loss(const Image2D& prob, const Mask2D& target);

struct Loss2D {
  double value = 0;
  DiceLoss projected;  // retrieved 3D prediction vs annotation
  DiceLoss direct;     // 2D prediction vs annotation
};

Loss2D loss_2d(const Image2D& prob_from_3d, const Image2D& prob_2d, const Mask2D& annotation);

double loss_all(double l3d, double l2d, double lambda);

}  // namespace mipseg
