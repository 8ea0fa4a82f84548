#include "mipseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mipseg/parallel.hpp"

namespace mipseg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Streams used by the generators.
enum : std::uint64_t {
  kStreamIntensity = 1,
  kStreamNoise = 2,
  kStreamPassBase = 16,
  kStreamLayout = 1000,
};

double radius_at(const Tube& tube, std::size_t segment, double t) {
  if (tube.radii.size() == 1) return tube.radii[0];
  return tube.radii[segment] * (1.0 - t) + tube.radii[segment + 1] * t;
}

// True when p is within the interpolated radius of some segment.
bool inside_tube(const Tube& tube, const Point3& p) {
  if (tube.points.size() == 1) {
    const auto& a = tube.points[0];
    const double d2 = (p[0] - a[0]) * (p[0] - a[0]) + (p[1] - a[1]) * (p[1] - a[1]) +
                      (p[2] - a[2]) * (p[2] - a[2]);
    return d2 <= tube.radii[0] * tube.radii[0];
  }
  for (std::size_t s = 0; s + 1 < tube.points.size(); ++s) {
    const auto& a = tube.points[s];
    const auto& b = tube.points[s + 1];
    double ab[3], ap[3];
    double len2 = 0.0, dot = 0.0;
    for (int k = 0; k < 3; ++k) {
      ab[k] = b[k] - a[k];
      ap[k] = p[k] - a[k];
      len2 += ab[k] * ab[k];
      dot += ab[k] * ap[k];
    }
    const double t = len2 > 0.0 ? std::clamp(dot / len2, 0.0, 1.0) : 0.0;
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double diff = ap[k] - t * ab[k];
      d2 += diff * diff;
    }
    const double r = radius_at(tube, s, t);
    if (d2 <= r * r) return true;
  }
  return false;
}

}  // namespace

double hash_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t h = splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double hash_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  // Box-Muller on two decorrelated uniforms; u1 kept away from 0.
  const double u1 = 1.0 - hash_uniform(seed, stream, 2 * counter);
  const double u2 = hash_uniform(seed, stream, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void PhantomSpec::validate() const {
  validate_dims(dims);
  validate_spacing(spacing);
  if (!(vessel.lo <= vessel.hi) || !(background.lo <= background.hi)) {
    throw Error(ErrorCode::kInvalidArgument, "intensity ranges need lo <= hi");
  }
  if (!(background.hi < vessel.lo) ||
      !(static_cast<float>(background.hi) < static_cast<float>(vessel.lo))) {
    throw Error(ErrorCode::kInvalidArgument,
                "background intensities must stay strictly below vessel intensities");
  }
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_std must be nonnegative");
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    const Tube& tube = tubes[t];
    if (tube.points.empty()) throw Error(ErrorCode::kInvalidArgument, "tube without points");
    if (tube.radii.size() != 1 && tube.radii.size() != tube.points.size()) {
      throw Error(ErrorCode::kInvalidArgument, "tube needs one radius or one per point");
    }
    for (double r : tube.radii) {
      if (!(r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tube radius must be positive");
    }
    for (const auto& p : tube.points) {
      for (int k = 0; k < 3; ++k) {
        if (!(p[k] >= 0.0 && p[k] <= dims.extent(k) - 1)) {
          throw Error(ErrorCode::kOutOfRange,
                      "tube " + std::to_string(t) + " has a control point outside the volume");
        }
      }
    }
  }
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Phantom out{ScalarVolume(spec.dims, spec.spacing, 0.0f),
              BinaryVolume(spec.dims, spec.spacing, std::uint8_t{0})};
  parallel_for(spec.dims.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Coord c = spec.dims.coord(i);
      const Point3 p{static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.z)};
      const bool vessel = std::any_of(spec.tubes.begin(), spec.tubes.end(),
                                      [&](const Tube& t) { return inside_tube(t, p); });
      const IntensityRange& range = vessel ? spec.vessel : spec.background;
      const double u = hash_uniform(spec.seed, kStreamIntensity, i);
      double v = range.lo + (range.hi - range.lo) * u;
      if (spec.noise_std > 0.0) v += spec.noise_std * hash_normal(spec.seed, kStreamNoise, i);
      out.volume[i] = static_cast<float>(std::clamp(v, range.lo, range.hi));
      out.ground_truth[i] = vessel ? 1 : 0;
    }
  }, 1024);
  return out;
}

PhantomSpec straight_tube_spec(Dims dims, int axis, double radius, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = dims;
  spec.seed = seed;
  Point3 a{(dims.nx - 1) / 2.0, (dims.ny - 1) / 2.0, (dims.nz - 1) / 2.0};
  Point3 b = a;
  a[axis] = 0.0;
  b[axis] = dims.extent(axis) - 1;
  spec.tubes.push_back({{a, b}, {radius}});
  return spec;
}

PhantomSpec y_branch_spec(Dims dims, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = dims;
  spec.seed = seed;
  const double cx = (dims.nx - 1) / 2.0;
  const double cy = (dims.ny - 1) / 2.0;
  const double zmax = dims.nz - 1;
  const Point3 root{cx, cy, 0.0};
  const Point3 fork{cx, cy, zmax * 0.45};
  spec.tubes.push_back({{root, fork}, {3.0, 2.5}});
  spec.tubes.push_back({{fork, {cx - dims.nx * 0.3, cy + dims.ny * 0.1, zmax}}, {2.5, 1.5}});
  spec.tubes.push_back({{fork, {cx + dims.nx * 0.3, cy - dims.ny * 0.1, zmax}}, {2.5, 1.5}});
  return spec;
}

PhantomSpec random_tubes_spec(Dims dims, int count, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = dims;
  spec.seed = seed;
  std::uint64_t counter = 0;
  auto next = [&] { return hash_uniform(seed, kStreamLayout, counter++); };
  for (int t = 0; t < count; ++t) {
    Tube tube;
    const int points = 2 + static_cast<int>(next() * 3.0);
    for (int k = 0; k < points; ++k) {
      tube.points.push_back({next() * (dims.nx - 1), next() * (dims.ny - 1), next() * (dims.nz - 1)});
      tube.radii.push_back(1.0 + 2.0 * next());
    }
    spec.tubes.push_back(std::move(tube));
  }
  return spec;
}

OracleOutputs oracle_probabilities(const BinaryVolume& ground_truth, double quality, int passes,
                                   double pass_noise, std::uint64_t seed) {
  if (!(quality > 0.5 && quality <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "oracle quality must be in (0.5, 1]");
  }
  if (passes < 0 || !(pass_noise >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pass count and pass noise must be nonnegative");
  }
  const std::size_t n = ground_truth.size();
  std::vector<float> clean(n);
  for (std::size_t i = 0; i < n; ++i) {
    clean[i] = static_cast<float>(ground_truth[i] ? quality : 1.0 - quality);
  }
  OracleOutputs out{ProbabilityVolume(ground_truth.dims(), ground_truth.spacing(), clean), {}};
  for (int k = 0; k < passes; ++k) {
    std::vector<float> p(n);
    const std::uint64_t stream = kStreamPassBase + static_cast<std::uint64_t>(k);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double noise = pass_noise > 0.0 ? pass_noise * hash_normal(seed, stream, i) : 0.0;
        p[i] = static_cast<float>(std::clamp(clean[i] + noise, 0.0, 1.0));
      }
    });
    out.passes.emplace_back(ground_truth.dims(), ground_truth.spacing(), std::move(p));
  }
  return out;
}

}  // namespace mipseg
