#include "mipseg/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "mipseg/parallel.hpp"

namespace mipseg {

FeatureGrid3D::FeatureGrid3D(int c, int w, int h, int d)
    : channels(c), width(w), height(h), depth(d) {
  validate_dims({w, h, d});
  if (c <= 0) throw Error(ErrorCode::kInvalidArgument, "channel count must be positive");
  values.assign(static_cast<std::size_t>(c) * w * h * d, 0.0f);
}

void FeatureGrid3D::validate() const {
  if (channels <= 0) throw Error(ErrorCode::kInvalidArgument, "channel count must be positive");
  validate_dims({width, height, depth});
  if (values.size() != static_cast<std::size_t>(channels) * width * height * depth) {
    throw Error(ErrorCode::kSizeMismatch, "feature grid length does not match its shape");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteValue, "feature grid is not finite");
  }
}

FeatureGrid3D FeatureGrid3D::from_volume(const ScalarVolume& stacked, int channels) {
  if (channels <= 0 || stacked.dims().nz % channels != 0) {
    throw Error(ErrorCode::kDimsMismatch,
                "stacked feature depth " + std::to_string(stacked.dims().nz) +
                    " is not a multiple of the channel count");
  }
  FeatureGrid3D f;
  f.channels = channels;
  f.width = stacked.dims().nx;
  f.height = stacked.dims().ny;
  f.depth = stacked.dims().nz / channels;
  f.values = stacked.data();
  f.validate();
  return f;
}

ScalarVolume FeatureGrid3D::to_volume() const {
  return ScalarVolume({width, height, depth * channels}, {}, values);
}

ScalarVolume FeatureGrid2D::to_volume() const {
  return ScalarVolume({width, height, channels}, {}, values);
}

IndexMapLevel downscale_index(const Mip2D& mip, int level) {
  if (level < 0 || level > kMaxPyramidLevel) {
    throw Error(ErrorCode::kOutOfRange, "pyramid level must be in [0, 3], got " + std::to_string(level));
  }
  const int factor = 1 << level;
  if (mip.width % factor != 0 || mip.height % factor != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "index map dims must be divisible by " + std::to_string(factor) + "; pad first");
  }
  IndexMapLevel out;
  out.level = level;
  out.width = mip.width / factor;
  out.height = mip.height / factor;
  out.depth = std::max(1, mip.depth_extent() / factor);
  out.index.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const std::int32_t v = mip.index[mip.pixel(x * factor, y * factor)] / factor;
      out.index[static_cast<std::size_t>(y) * out.width + x] = std::clamp(v, 0, out.depth - 1);
    }
  }
  return out;
}

FeatureGrid2D feature_retrieve(const FeatureGrid3D& f3d, const IndexMapLevel& idx) {
  if (idx.width != f3d.width || idx.height != f3d.height) {
    throw Error(ErrorCode::kDimsMismatch, "index map does not match feature grid spatial dims");
  }
  for (std::int32_t d : idx.index) {
    if (d < 0 || d >= f3d.depth) {
      throw Error(ErrorCode::kOutOfRange, "index value " + std::to_string(d) +
                                              " outside feature depth " + std::to_string(f3d.depth));
    }
  }
  FeatureGrid2D out{f3d.channels, f3d.width, f3d.height, {}};
  out.values.resize(static_cast<std::size_t>(f3d.channels) * f3d.width * f3d.height);
  const std::size_t plane = static_cast<std::size_t>(f3d.width) * f3d.height;
  parallel_for(plane, [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const int x = static_cast<int>(p % static_cast<std::size_t>(f3d.width));
      const int y = static_cast<int>(p / static_cast<std::size_t>(f3d.width));
      const int d = idx.index[p];
      for (int c = 0; c < f3d.channels; ++c) out.values[out.offset(c, x, y)] = f3d.at(c, x, y, d);
    }
  });
  return out;
}

namespace {

double clamp_prob(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

bool inside_clamp(double p) { return p > kProbabilityClamp && p < 1.0 - kProbabilityClamp; }

// Adds -mean log(q) (foreground) or -mean log(1 - q) (background) over `set`.
double cross_entropy_term(const ProbabilityVolume& prob, const VoxelSet& set, bool foreground,
                          Grid<double>* gradient) {
  if (set.empty()) return 0.0;
  const auto& idx = set.indices();
  const double n = static_cast<double>(idx.size());
  const double sum = stable_sum(idx.size(), [&](std::size_t k) {
    const double q = clamp_prob(prob[idx[k]]);
    return -std::log(foreground ? q : 1.0 - q);
  });
  if (gradient) {
    for (Index i : idx) {
      const double p = prob[i];
      if (!inside_clamp(p)) continue;
      (*gradient)[i] += foreground ? -1.0 / (n * p) : 1.0 / (n * (1.0 - p));
    }
  }
  return sum / n;
}

}  // namespace

Loss3D loss_3d(const ProbabilityVolume& prob, const VoxelSet& s_f, const VoxelSet& s_p,
               const VoxelSet& s_b, bool with_gradient) {
  Loss3D out;
  for (const auto* set : {&s_f, &s_p, &s_b}) {
    if (!set->empty() && set->indices().back() >= prob.size()) {
      throw Error(ErrorCode::kOutOfRange, "loss set has voxels outside the probability volume");
    }
  }
  if (with_gradient) out.gradient = Grid<double>(prob.dims(), prob.spacing(), 0.0);
  Grid<double>* g = with_gradient ? &out.gradient : nullptr;
  if (s_f.empty()) out.warnings.push_back("S_f is empty; its term is 0");
  if (s_p.empty()) out.warnings.push_back("S_p is empty; its term is 0");
  if (s_b.empty()) out.warnings.push_back("S_b is empty; its term is 0");
  out.foreground = cross_entropy_term(prob, s_f, true, g);
  out.seeds = cross_entropy_term(prob, s_p, true, g);
  out.background = cross_entropy_term(prob, s_b, false, g);
  out.value = out.foreground + out.seeds + out.background;
  return out;
}

DiceLoss dice_loss(const Image2D& prob, const Mask2D& target) {
  if (prob.width != target.width || prob.height != target.height ||
      prob.values.size() != target.bits.size()) {
    throw Error(ErrorCode::kDimsMismatch, "probability image and mask dims differ");
  }
  const std::size_t n = prob.values.size();
  const double inter = stable_sum(n, [&](std::size_t i) {
    return target.bits[i] ? prob.values[i] : 0.0;
  });
  const double sum_p = stable_sum(n, [&](std::size_t i) { return prob.values[i]; });
  const double sum_y = static_cast<double>(target.popcount());
  const double num = 2.0 * inter + kDiceSmoothing;
  const double den = sum_p + sum_y + kDiceSmoothing;
  DiceLoss out;
  out.value = 1.0 - num / den;
  out.gradient.resize(n);
  const double den2 = den * den;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = target.bits[i] ? 1.0 : 0.0;
    out.gradient[i] = -(2.0 * y * den - num) / den2;
  }
  return out;
}

Loss2D loss_2d(const Image2D& prob_from_3d, const Image2D& prob_2d, const Mask2D& annotation) {
  Loss2D out;
  out.projected = dice_loss(prob_from_3d, annotation);
  out.direct = dice_loss(prob_2d, annotation);
  out.value = out.projected.value + out.direct.value;
  return out;
}

double loss_all(double l3d, double l2d, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  return l3d + lambda * l2d;
}

}  // namespace mipseg
