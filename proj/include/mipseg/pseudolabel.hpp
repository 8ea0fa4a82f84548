#pragma once

#include "mipseg/grid.hpp"
#include "mipseg/projection.hpp"

namespace mipseg {

enum class Connectivity { k6 = 6, k26 = 26 };

struct GrowConfig {
  // Admit a neighbor q iff |X(q) - v_ave| < alpha (normalized intensity units).
  double alpha = 0.1;
  Connectivity connectivity = Connectivity::k26;

  void validate() const;
  friend bool operator==(const GrowConfig&, const GrowConfig&) = default;
};

// Background thresholds as multiples of the seed mean intensity v_ave.
struct BackgroundConfig {
  double beta_coef = 0.2;
  double gamma_coef = 1.2;
  double eta_coef = 1.6;

  void validate() const;
  friend bool operator==(const BackgroundConfig&, const BackgroundConfig&) = default;
};

struct BackgroundThresholds {
  double beta = 0;
  double gamma = 0;
  double eta = 0;
};

BackgroundThresholds background_thresholds(double v_ave, const BackgroundConfig& cfg);

double foreground_mean(const ScalarVolume& volume, const VoxelSet& seeds);

// Flood fill from the seeds. The acceptance reference v_ave is the seed mean
// and stays fixed during growth, so the result does not depend on visit order.
VoxelSet region_grow(const ScalarVolume& volume, const VoxelSet& seeds, const GrowConfig& cfg);

// S_0 = (T_b1 ∪ T_b2) \ T_b3 where, with Y the annotation on the voxel's ray,
//   T_b1: Y = 0
//   T_b2: Y = 1 and X < beta
//   T_b3: Y = 0 and gamma < X < eta
VoxelSet build_background(const ScalarVolume& volume, const Mask2D& annotation, const Mip2D& mip,
                          double v_ave, const BackgroundConfig& cfg);

struct AssembledLabels {
  LabelVolume labels;
  // Voxels claimed by both S_0 and S_1. Marked unlabeled in `labels`; the
  // refiner removes them from both classes.
  VoxelSet conflicts;
};

AssembledLabels assemble_pseudolabel(const VoxelSet& s1, const VoxelSet& s0, Dims dims,
                                     Spacing spacing = {});

struct PseudoLabelResult {
  VoxelSet seeds;
  double v_ave = 0;
  VoxelSet foreground;
  VoxelSet background;
  AssembledLabels assembled;
};

// back_project -> foreground_mean -> region_grow -> build_background -> assemble.
PseudoLabelResult generate_pseudolabel(const ScalarVolume& volume, const Mask2D& annotation,
                                       const Mip2D& mip, const GrowConfig& grow,
                                       const BackgroundConfig& background);

}  // namespace mipseg
