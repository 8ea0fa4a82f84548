#pragma once

// One round of pseudo-label refinement over labeled and unlabeled voxels.
//
// Labeled voxels are audited with confident learning: per-class average
// self-confidence thresholds give latent class sets, their overlap with the
// given labels gives a count matrix and joint distribution, and the estimated
// off-diagonal noise mass decides how many voxels each class loses (prune by
// noise rate). Removed voxels may switch class when an intensity or distance
// prior supports it.
//
// Unlabeled voxels are labeled from K stochastic prediction passes: where the
// clean and pass-averaged predictions agree and the predictive entropy is
// below that class's mean, the voxel is adopted (again subject to a prior).
//
// Probability volumes come from an external network; nothing here runs one.

#include <array>
#include <optional>
#include <span>

#include "mipseg/distance.hpp"
#include "mipseg/grid.hpp"

namespace mipseg {

struct RefineConfig {
  int passes = 6;        // K, number of stochastic prediction passes
  double sigma = 0.1;    // input noise std used by the trainer (recorded only)
  double mu = 0.0;       // input noise mean used by the trainer (recorded only)
  double d_th1 = 1.5;    // voxels; background -> foreground switch during pruning
  double d_th2 = 4.0;    // voxels; unlabeled -> foreground adoption
  double eps1 = 0.7;     // x v_ave; foreground -> background switch during pruning
  double eps2 = 0.2;     // x v_ave; unlabeled -> background adoption
  bool disable_priors = false;  // all four thresholds treated as infinite

  void validate() const;
  friend bool operator==(const RefineConfig&, const RefineConfig&) = default;
};

// The given label sets. A conflict voxel belongs to both.
struct LabelSets {
  VoxelSet s0;
  VoxelSet s1;

  const VoxelSet& of(int cls) const { return cls == 0 ? s0 : s1; }
  VoxelSet labeled() const { return set_union(s0, s1); }
  VoxelSet conflicts() const { return set_intersection(s0, s1); }
};

LabelSets label_sets(const LabelVolume& labels, const VoxelSet& conflicts);

// Class with the larger probability; p_fg == 0.5 resolves to foreground.
inline int argmax_class(double p_fg) { return p_fg >= 0.5 ? 1 : 0; }

struct LatentSets {
  std::array<double, 2> t{};  // average self-confidence per given class
  VoxelSet s0_star;
  VoxelSet s1_star;

  const VoxelSet& of(int cls) const { return cls == 0 ? s0_star : s1_star; }
};

// S_i* = { p in Ω_L : argmax(p) = i and ŷ_p(i) > t_i }.
LatentSets latent_sets(const LabelSets& sets, const ProbabilityVolume& prob);

struct ClState {
  std::array<double, 2> t{};
  std::array<std::array<std::size_t, 2>, 2> intersections{};  // |S_i ∩ S_j*|
  std::array<std::array<double, 2>, 2> count_matrix{};        // normalized counts C̃
  std::array<std::array<double, 2>, 2> joint{};               // Q̂
  std::array<std::size_t, 2> quota{};  // floor(|Ω_L| * Q̂[i][1-i])
  std::size_t labeled = 0;              // |Ω_L|
};

// Throws kDegenerateConfidentLearning when all four intersections are empty.
ClState count_and_joint(const LabelSets& sets, const LatentSets& latent);

struct Removals {
  std::array<VoxelSet, 2> by_class;  // S_i^(re), conflicts included
  std::array<std::optional<double>, 2> cutoff_margin;  // smallest removed margin
  std::array<std::size_t, 2> pruned{};  // removed by noise rate (excluding conflicts)
};

// Per class, the quota[i] candidates of S_i ∩ S_{1-i}* with the largest
// margin ŷ(1-i) - ŷ(i) (ties by ascending voxel index), plus every conflict.
Removals pbnr_remove(const LabelSets& sets, const ProbabilityVolume& prob,
                     const LatentSets& latent, const ClState& state);

struct AddSets {
  std::array<VoxelSet, 2> by_class;
};

// Background gains removed foreground voxels with X < eps1 * v_ave; foreground
// gains removed background voxels with D(p, S_1) < d_th1.
AddSets cl_add(const ScalarVolume& volume, const Removals& removals,
               const DistanceField& distance_to_fg, double v_ave, const RefineConfig& cfg);
AddSets cl_add(const ScalarVolume& volume, const Removals& removals, const VoxelSet& s1,
               double v_ave, const RefineConfig& cfg);

struct McAggregate {
  ProbabilityVolume mean;  // Ŷ_dp
  Grid<double> entropy;    // u_p in bits
};

// Binary entropy in bits of the mean prediction, 0 log 0 = 0.
double binary_entropy_bits(double p_fg);

McAggregate mc_aggregate(const ProbabilityVolume& clean,
                         std::span<const ProbabilityVolume> passes);

struct UeResult {
  AddSets adds;
  std::array<std::optional<double>, 2> u_ave;  // empty when no voxel agrees
  std::array<std::size_t, 2> agreeing{};
};

// Restricted to Ω_U: a voxel whose clean and averaged argmax both equal i,
// with u_p < u_ave^i and the class prior (X < eps2 * v_ave for background,
// D(p, S_1) < d_th2 for foreground), joins class i.
UeResult ue_add(const LabelSets& sets, const ScalarVolume& volume, const ProbabilityVolume& clean,
                const McAggregate& mc, const DistanceField& distance_to_fg, double v_ave,
                const RefineConfig& cfg);

struct RefinementReport {
  bool cl_degenerate = false;
  ClState cl;
  std::array<std::optional<double>, 2> cutoff_margin;
  std::size_t conflicts = 0;
  std::array<std::size_t, 2> removed{};
  std::array<std::size_t, 2> pruned{};
  std::array<std::size_t, 2> add_cl{};
  std::array<std::size_t, 2> add_ue{};
  std::array<std::optional<double>, 2> u_ave;
  std::array<std::size_t, 2> agreeing{};
  std::array<std::size_t, 3> counts_before{};  // background, foreground, unlabeled
  std::array<std::size_t, 3> counts_after{};
};

struct RefineResult {
  LabelVolume labels;
  RefinementReport report;
};

// S̃_i = ((S_i ∪ S_i^(add1)) \ S_i^(re)) ∪ S_i^(add2).
RefineResult refine_round(const LabelVolume& labels, const VoxelSet& conflicts,
                          const ScalarVolume& volume, const ProbabilityVolume& clean,
                          std::span<const ProbabilityVolume> passes, double v_ave,
                          const RefineConfig& cfg);

}  // namespace mipseg
