#include "mipseg/pseudolabel.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <string>

#include "mipseg/parallel.hpp"

namespace mipseg {

void GrowConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  }
  if (connectivity != Connectivity::k6 && connectivity != Connectivity::k26) {
    throw Error(ErrorCode::kInvalidArgument, "connectivity must be 6 or 26");
  }
}

void BackgroundConfig::validate() const {
  if (!(beta_coef > 0.0 && beta_coef < gamma_coef && gamma_coef < eta_coef)) {
    throw Error(ErrorCode::kInvalidArgument,
                "background coefficients need 0 < beta < gamma < eta");
  }
}

BackgroundThresholds background_thresholds(double v_ave, const BackgroundConfig& cfg) {
  return {cfg.beta_coef * v_ave, cfg.gamma_coef * v_ave, cfg.eta_coef * v_ave};
}

double foreground_mean(const ScalarVolume& volume, const VoxelSet& seeds) {
  if (seeds.empty()) throw Error(ErrorCode::kEmptySet, "seed set is empty");
  double sum = 0.0;
  for (Index i : seeds) {
    if (i >= volume.size()) throw Error(ErrorCode::kOutOfRange, "seed outside volume");
    sum += volume[i];
  }
  return sum / static_cast<double>(seeds.size());
}

namespace {

std::vector<Coord> neighbor_offsets(Connectivity c) {
  std::vector<Coord> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (c == Connectivity::k6 && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

VoxelSet region_grow(const ScalarVolume& volume, const VoxelSet& seeds, const GrowConfig& cfg) {
  cfg.validate();
  const double v_ave = foreground_mean(volume, seeds);
  const Dims& dims = volume.dims();
  const auto offsets = neighbor_offsets(cfg.connectivity);

  std::vector<std::uint8_t> visited(volume.size(), 0);
  std::deque<Index> frontier;
  std::vector<Index> grown;
  for (Index s : seeds) {
    visited[s] = 1;
    frontier.push_back(s);
    grown.push_back(s);
  }
  while (!frontier.empty()) {
    const Coord c = dims.coord(frontier.front());
    frontier.pop_front();
    for (const Coord& d : offsets) {
      const Coord q{c.x + d.x, c.y + d.y, c.z + d.z};
      if (!dims.contains(q)) continue;
      const Index qi = dims.linear(q);
      if (visited[qi]) continue;
      visited[qi] = 1;
      if (std::abs(static_cast<double>(volume[qi]) - v_ave) < cfg.alpha) {
        frontier.push_back(qi);
        grown.push_back(qi);
      }
    }
  }
  return VoxelSet(std::move(grown));
}

VoxelSet build_background(const ScalarVolume& volume, const Mask2D& annotation, const Mip2D& mip,
                          double v_ave, const BackgroundConfig& cfg) {
  cfg.validate();
  if (!(v_ave > 0.0)) throw Error(ErrorCode::kInvalidArgument, "v_ave must be positive");
  if (!(mip.source_dims == volume.dims())) {
    throw Error(ErrorCode::kDimsMismatch, "projection was computed from a different volume");
  }
  if (annotation.width != mip.width || annotation.height != mip.height) {
    throw Error(ErrorCode::kDimsMismatch, "annotation does not match projection dims");
  }
  const auto th = background_thresholds(v_ave, cfg);
  const Dims& dims = volume.dims();
  std::vector<std::uint8_t> in_s0(volume.size(), 0);
  parallel_for(volume.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto [pa, pb] = projected_pixel(mip.axis, dims.coord(i));
      const bool annotated = annotation.bits[annotation.pixel(pa, pb)] != 0;
      const double x = volume[i];
      const bool tb1 = !annotated;
      const bool tb2 = annotated && x < th.beta;
      const bool tb3 = !annotated && th.gamma < x && x < th.eta;
      in_s0[i] = (tb1 || tb2) && !tb3;
    }
  });
  std::vector<Index> out;
  for (Index i = 0; i < in_s0.size(); ++i) {
    if (in_s0[i]) out.push_back(i);
  }
  return VoxelSet(std::move(out));
}

AssembledLabels assemble_pseudolabel(const VoxelSet& s1, const VoxelSet& s0, Dims dims,
                                     Spacing spacing) {
  AssembledLabels out{LabelVolume(dims, spacing, Label::kUnlabeled), {}};
  for (Index i : s1) {
    if (i >= out.labels.size()) throw Error(ErrorCode::kOutOfRange, "S_1 voxel outside volume");
    out.labels[i] = Label::kForeground;
  }
  for (Index i : s0) {
    if (i >= out.labels.size()) throw Error(ErrorCode::kOutOfRange, "S_0 voxel outside volume");
    out.labels[i] = out.labels[i] == Label::kForeground ? Label::kUnlabeled : Label::kBackground;
  }
  out.conflicts = set_intersection(s0, s1);
  return out;
}

PseudoLabelResult generate_pseudolabel(const ScalarVolume& volume, const Mask2D& annotation,
                                       const Mip2D& mip, const GrowConfig& grow,
                                       const BackgroundConfig& background) {
  PseudoLabelResult r;
  r.seeds = back_project(annotation, mip);
  if (r.seeds.empty()) throw Error(ErrorCode::kEmptySet, "annotation has no vessel pixels");
  r.v_ave = foreground_mean(volume, r.seeds);
  r.foreground = region_grow(volume, r.seeds, grow);
  r.background = build_background(volume, annotation, mip, r.v_ave, background);
  r.assembled = assemble_pseudolabel(r.foreground, r.background, volume.dims(), volume.spacing());
  return r;
}

}  // namespace mipseg
