// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when any
// criterion fails. Tolerances are fixed here and must not be loosened.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "mipseg/fusion.hpp"
#include "mipseg/metaimage.hpp"
#include "mipseg/metrics.hpp"
#include "mipseg/phantom.hpp"
#include "mipseg/projection.hpp"
#include "mipseg/pseudolabel.hpp"
#include "mipseg/refine.hpp"
#include "mipseg/serialization.hpp"
#include "mipseg/volume_ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mipseg;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr double kBackProjectSeconds = 1.0;
constexpr double kRegionGrowSeconds = 5.0;
constexpr int kBackgroundSeeds = 1000;
constexpr double kFlipFraction = 0.05;
constexpr double kOracleQuality = 0.9;
constexpr int kOraclePasses = 6;
constexpr int kNoiseSeeds = 10;
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kGradientRelativeError = 1e-4;
constexpr int kGradientInstances = 100;
constexpr double kAhdTolerance = 1e-9;
constexpr int kSkeletonCorpus = 50;
constexpr double kEntropyGrid = 1e-3;
constexpr int kIoVolumes = 200;
// Recall of the independent flood-fill oracle on the region-growing phantom,
// recorded on its first execution (1058 of 1706 GT voxels).
constexpr double kFrozenFloodFillRecall = 1058.0 / 1706.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

ScalarVolume separated_phantom(Dims dims, std::uint64_t seed, BinaryVolume& gt) {
  const Phantom ph = generate_phantom(y_branch_spec(dims, seed));
  gt = ph.ground_truth;
  return normalize_intensity(ph.volume);
}

Outcome back_projection_soundness() {
  BinaryVolume gt;
  const ScalarVolume v = separated_phantom({64, 64, 64}, 1, gt);
  const Mask2D y = project_mask(gt);
  const auto t0 = std::chrono::steady_clock::now();
  const Mip2D m = mip_project(v);
  const VoxelSet sp = back_project(y, m);
  const double dt = seconds_since(t0);
  std::size_t outside = 0;
  for (Index i : sp) outside += gt[i] == 0;
  return {outside == 0 && !sp.empty() && dt < kBackProjectSeconds,
          std::to_string(sp.size()) + " seeds, " + std::to_string(outside) + " outside GT, " +
              fmt(dt) + " s"};
}

Outcome region_growing_containment() {
  BinaryVolume gt;
  const ScalarVolume v = separated_phantom({64, 64, 64}, 1, gt);
  const Mip2D m = mip_project(v);
  const VoxelSet seeds = back_project(project_mask(gt), m);
  const GrowConfig cfg{};  // alpha 0.1, below the 0.5 class gap
  const auto t0 = std::chrono::steady_clock::now();
  const VoxelSet s1 = region_grow(v, seeds, cfg);
  const double dt = seconds_since(t0);
  std::size_t outside = 0, gt_count = 0;
  for (Index i : s1) outside += gt[i] == 0;
  for (auto g : gt.values()) gt_count += g != 0;
  const double recall = static_cast<double>(s1.size() - outside) / static_cast<double>(gt_count);
  const auto ref = oracle::flood_fill(v, seeds.indices(), oracle::mean_of(v, seeds.indices()), cfg.alpha, 26);
  std::size_t ref_hits = 0;
  for (Index i = 0; i < ref.size(); ++i) ref_hits += ref[i] && gt[i];
  const double oracle_recall = static_cast<double>(ref_hits) / static_cast<double>(gt_count);
  const bool pass = outside == 0 && recall >= oracle_recall && recall >= kFrozenFloodFillRecall &&
                    dt < kRegionGrowSeconds;
  return {pass, "recall " + fmt(recall) + " vs oracle " + fmt(oracle_recall) + " (" + std::to_string(ref_hits) + "/" + std::to_string(gt_count) + ")" + " (frozen " +
                    fmt(kFrozenFloodFillRecall) + "), " + std::to_string(outside) + " outside GT, " +
                    fmt(dt) + " s"};
}

Outcome background_set_correctness() {
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution bit(0.3);
  std::uniform_real_distribution<double> vave(0.2, 0.9);
  std::size_t mismatches = 0;
  for (int seed = 0; seed < kBackgroundSeeds; ++seed) {
    const ScalarVolume v = oracle::random_volume(rng, {16, 16, 16});
    const Mip2D m = mip_project(v);
    Mask2D y(m.width, m.height);
    for (auto& b : y.bits) b = bit(rng);
    const double va = vave(rng);
    const VoxelSet got = build_background(v, y, m, va, {});
    std::vector<Index> want;
    for (Index i = 0; i < v.size(); ++i) {
      const Coord c = v.dims().coord(i);
      const bool annotated = y.bits[static_cast<std::size_t>(c.x) + 16u * c.y] != 0;
      const double x = v[i];
      const bool tb1 = !annotated;
      const bool tb2 = x < 0.2 * va && annotated;
      const bool tb3 = 1.2 * va < x && x < 1.6 * va && !annotated;
      if ((tb1 || tb2) && !tb3) want.push_back(i);
    }
    mismatches += got.indices() != want;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatching volumes of " +
                               std::to_string(kBackgroundSeeds)};
}

Outcome cl_fixed_point() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> hi(0.5f, 1.0f), lo(0.0f, 0.4999f);
  int failures = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const Dims d{12, 11, 10};
    std::bernoulli_distribution fg(0.25);
    LabelVolume labels(d, {}, Label::kBackground);
    std::vector<float> p(d.size());
    for (Index i = 0; i < d.size(); ++i) {
      const bool f = i == 0 || (i != 1 && fg(rng));
      labels[i] = f ? Label::kForeground : Label::kBackground;
      // Alternate constant and varying oracles, both consistent with labels.
      p[i] = trial % 2 ? (f ? hi(rng) : lo(rng)) : (f ? 0.9f : 0.1f);
    }
    const ProbabilityVolume clean(d, {}, p);
    const std::vector<ProbabilityVolume> passes(kOraclePasses, clean);
    const ScalarVolume v(d, {}, 0.5f);
    const RefineResult r = refine_round(labels, {}, v, clean, passes, 0.5, {});
    failures += !(r.labels == labels);
  }
  return {failures == 0, std::to_string(trials - failures) + "/" + std::to_string(trials) +
                             " instances unchanged"};
}

Outcome noise_reduction() {
  int passed = 0;
  std::string worst;
  for (int seed = 1; seed <= kNoiseSeeds; ++seed) {
    const Phantom ph = generate_phantom(random_tubes_spec({48, 48, 48}, 3, seed));
    const ScalarVolume v = normalize_intensity(ph.volume);
    const Mip2D m = mip_project(v);
    const PseudoLabelResult pl = generate_pseudolabel(v, project_mask(ph.ground_truth), m, {}, {});
    LabelVolume noisy = pl.assembled.labels;

    // Flip 5% of each labeled class, chosen uniformly.
    std::mt19937_64 rng(1000 + seed);
    std::array<std::vector<Index>, 2> members{VoxelSet::where(noisy, Label::kBackground).indices(),
                                              VoxelSet::where(noisy, Label::kForeground).indices()};
    for (int cls : {0, 1}) {
      std::shuffle(members[cls].begin(), members[cls].end(), rng);
      const auto flips = static_cast<std::size_t>(std::llround(kFlipFraction * members[cls].size()));
      const Label other = cls == 1 ? Label::kBackground : Label::kForeground;
      for (std::size_t k = 0; k < flips; ++k) noisy[members[cls][k]] = other;
    }

    const OracleOutputs o = oracle_probabilities(ph.ground_truth, kOracleQuality, kOraclePasses,
                                                 0.05, seed);
    RefineConfig cfg;
    cfg.passes = kOraclePasses;
    const RefineResult r = refine_round(noisy, pl.assembled.conflicts, v, o.clean, o.passes, pl.v_ave, cfg);

    struct Stats {
      std::size_t wrong = 0;
      std::array<std::size_t, 2> correct{}, total{};
    };
    auto stats = [&](const LabelVolume& l) {
      Stats s;
      for (Index i = 0; i < l.size(); ++i) {
        if (l[i] == Label::kUnlabeled) continue;
        const int cls = l[i] == Label::kForeground ? 1 : 0;
        ++s.total[cls];
        if (cls == ph.ground_truth[i]) {
          ++s.correct[cls];
        } else {
          ++s.wrong;
        }
      }
      return s;
    };
    const Stats before = stats(noisy), after = stats(r.labels);
    bool ok = after.wrong < before.wrong;
    for (int c : {0, 1}) {
      // correct_after / total_after >= correct_before / total_before, in integers.
      ok = ok && after.total[c] > 0 &&
           static_cast<unsigned __int128>(after.correct[c]) * before.total[c] >=
               static_cast<unsigned __int128>(before.correct[c]) * after.total[c];
    }
    passed += ok;
    if (!ok || seed == 1) {
      worst = "seed " + std::to_string(seed) + ": wrong " + std::to_string(before.wrong) + " -> " +
              std::to_string(after.wrong);
    }
  }
  return {passed == kNoiseSeeds, std::to_string(passed) + "/" + std::to_string(kNoiseSeeds) +
                                     " seeds; " + worst};
}

Outcome gather_equality() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::size_t grids = 0, mismatches = 0;
  auto check = [&](const FeatureGrid3D& f, const std::vector<std::int32_t>& idx) {
    IndexMapLevel map{0, f.width, f.height, f.depth, idx};
    const FeatureGrid2D out = feature_retrieve(f, map);
    for (int c = 0; c < f.channels; ++c)
      for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
          const std::size_t d = idx[static_cast<std::size_t>(y) * f.width + x];
          const std::size_t off = x + static_cast<std::size_t>(f.width) *
                                          (y + static_cast<std::size_t>(f.height) *
                                                   (d + static_cast<std::size_t>(f.depth) * c));
          // Bitwise equality.
          const float got = out.at(c, x, y);
          if (std::memcmp(&got, &f.values[off], sizeof(float)) != 0) ++mismatches;
        }
    ++grids;
  };
  for (int c = 1; c <= 3; ++c)
    for (int w = 1; w <= 6; ++w)
      for (int h = 1; h <= 6; ++h)
        for (int d = 1; d <= 6; ++d) {
          FeatureGrid3D f(c, w, h, d);
          for (auto& x : f.values) x = u(rng);
          for (int k = 0; k < d; ++k) check(f, std::vector<std::int32_t>(w * h, k));
          std::uniform_int_distribution<int> pick(0, d - 1);
          std::vector<std::int32_t> idx(w * h);
          for (auto& x : idx) x = pick(rng);
          check(f, idx);
        }
  FeatureGrid3D big(16, 64, 64, 64);
  for (auto& x : big.values) x = u(rng);
  std::uniform_int_distribution<int> pick(0, 63);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<std::int32_t> idx(64 * 64);
    for (auto& x : idx) x = pick(rng);
    check(big, idx);
  }
  return {mismatches == 0, std::to_string(grids) + " index maps, " + std::to_string(mismatches) +
                               " mismatching values"};
}

Outcome loss_gradients() {
  std::mt19937_64 rng(66);
  double worst = 0;
  std::size_t checked = 0;
  const double h = kFiniteDifferenceStep;
  // Cross-entropy terms.
  std::uniform_real_distribution<float> u(0.05f, 0.95f);
  std::bernoulli_distribution pick(0.3);
  for (int trial = 0; trial < kGradientInstances; ++trial) {
    const Dims d{4, 4, 3};
    std::vector<float> p(d.size());
    for (auto& x : p) x = u(rng);
    std::vector<Index> sf, sp, sb;
    for (Index i = 0; i < d.size(); ++i) {
      if (pick(rng)) sf.push_back(i);
      if (pick(rng)) sp.push_back(i);
      if (pick(rng)) sb.push_back(i);
    }
    const VoxelSet f(sf), s(sp), b(sb);
    const Loss3D l = loss_3d(ProbabilityVolume(d, {}, p), f, s, b, true);
    for (Index i = 0; i < d.size(); ++i) {
      if (l.gradient[i] == 0.0) continue;
      std::vector<float> plus = p, minus = p;
      plus[i] = static_cast<float>(p[i] + h);
      minus[i] = static_cast<float>(p[i] - h);
      const double step = static_cast<double>(plus[i]) - minus[i];
      const double fd = (loss_3d(ProbabilityVolume(d, {}, plus), f, s, b).value -
                         loss_3d(ProbabilityVolume(d, {}, minus), f, s, b).value) /
                        step;
      worst = std::max(worst, std::fabs(fd - l.gradient[i]) / std::fabs(l.gradient[i]));
      ++checked;
    }
  }
  // Dice terms.
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::bernoulli_distribution bit(0.4);
  for (int trial = 0; trial < kGradientInstances; ++trial) {
    Image2D p{7, 5, std::vector<double>(35)};
    for (auto& x : p.values) x = ud(rng);
    Mask2D y(7, 5);
    for (auto& x : y.bits) x = bit(rng);
    const DiceLoss l = dice_loss(p, y);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      Image2D plus = p, minus = p;
      plus.values[i] += h;
      minus.values[i] -= h;
      const double fd = (dice_loss(plus, y).value - dice_loss(minus, y).value) / (2 * h);
      worst = std::max(worst, std::fabs(fd - l.gradient[i]) / std::fabs(l.gradient[i]));
      ++checked;
    }
  }
  return {worst < kGradientRelativeError,
          std::to_string(checked) + " partials, worst relative error " + fmt(worst)};
}

Outcome metrics_oracles() {
  std::mt19937_64 rng(88);
  std::size_t dsc_mismatch = 0;
  double ahd_worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> e(1, 10);
    const Dims d{e(rng), e(rng), e(rng)};
    BinaryVolume a = oracle::random_mask(rng, d, 0.2);
    BinaryVolume b = oracle::random_mask(rng, d, 0.2);
    a[0] = 1;
    b[b.size() - 1] = 1;
    dsc_mismatch += dsc(a, b) != oracle::dsc(a, b);
    ahd_worst = std::max(ahd_worst, std::fabs(ahd(a, b) - oracle::ahd(a, b)));
  }
  double cl_worst = 0;
  std::size_t component_mismatch = 0;
  for (int seed = 1; seed <= kSkeletonCorpus; ++seed) {
    const Phantom ph = generate_phantom(random_tubes_spec({24, 24, 24}, 2, seed));
    cl_worst = std::max(cl_worst, std::fabs(cldice(ph.ground_truth, ph.ground_truth) - 1.0));
    component_mismatch +=
        count_components(skeletonize(ph.ground_truth)) != count_components(ph.ground_truth);
  }
  const bool pass = dsc_mismatch == 0 && ahd_worst <= kAhdTolerance && cl_worst == 0.0 &&
                    component_mismatch == 0;
  return {pass, "dsc mismatches " + std::to_string(dsc_mismatch) + ", ahd worst " + fmt(ahd_worst) +
                    " mm, cldice worst |1 - x| " + fmt(cl_worst) + ", component mismatches " +
                    std::to_string(component_mismatch) + "/" + std::to_string(kSkeletonCorpus)};
}

Outcome entropy_bounds() {
  bool ok = binary_entropy_bits(0.5) == 1.0 && binary_entropy_bits(0.0) == 0.0 &&
            binary_entropy_bits(1.0) == 0.0;
  std::size_t violations = 0;
  const int steps = static_cast<int>(std::lround(0.5 / kEntropyGrid));
  for (int k = 1; k <= steps; ++k) {
    const double prev = (k - 1) * kEntropyGrid, cur = k * kEntropyGrid;
    // Strictly decreasing as the mean moves away from 0.5 on either side.
    violations += !(binary_entropy_bits(0.5 + cur) < binary_entropy_bits(0.5 + prev));
    violations += !(binary_entropy_bits(0.5 - cur) < binary_entropy_bits(0.5 - prev));
    violations += binary_entropy_bits(0.5 + cur) < 0.0 || binary_entropy_bits(0.5 + cur) > 1.0;
  }
  ok = ok && violations == 0;
  return {ok, std::to_string(violations) + " violations on the grid"};
}

Outcome metaimage_io() {
  testutil::TempDir dir("accept-io");
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> e(1, 12);
  std::uniform_int_distribution<std::uint32_t> bits32;
  std::size_t failures = 0, total = 0;
  for (int type = 0; type < 4; ++type) {
    for (int trial = 0; trial < kIoVolumes; ++trial) {
      MetaImage img;
      img.dims = {e(rng), e(rng), e(rng)};
      const std::size_t n = img.dims.size();
      switch (type) {
        case 0: {
          std::vector<std::uint8_t> v(n);
          for (auto& x : v) x = static_cast<std::uint8_t>(bits32(rng));
          img.payload = v;
          break;
        }
        case 1: {
          std::vector<std::int16_t> v(n);
          for (auto& x : v) x = static_cast<std::int16_t>(bits32(rng));
          img.payload = v;
          break;
        }
        case 2: {
          std::vector<std::uint16_t> v(n);
          for (auto& x : v) x = static_cast<std::uint16_t>(bits32(rng));
          img.payload = v;
          break;
        }
        default: {
          std::vector<float> v(n);
          for (auto& x : v) {
            // Arbitrary finite bit patterns.
            do {
              const std::uint32_t b = bits32(rng);
              std::memcpy(&x, &b, sizeof x);
            } while (!std::isfinite(x));
          }
          img.payload = v;
        }
      }
      const fs::path path = dir / (trial % 2 ? "v.mha" : "v.mhd");
      write_metaimage(path, img);
      const MetaImage back = read_metaimage(path);
      const bool same = back.dims == img.dims && back.spacing == img.spacing &&
                        back.payload.index() == img.payload.index() &&
                        std::visit(
                            [&](const auto& a) {
                              const auto& b = std::get<std::decay_t<decltype(a)>>(back.payload);
                              return a.size() == b.size() &&
                                     std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])) == 0;
                            },
                            img.payload);
      failures += !same;
      ++total;
    }
  }
  return {failures == 0, std::to_string(total - failures) + "/" + std::to_string(total) +
                             " volumes bit-exact"};
}

Outcome determinism() {
  testutil::TempDir dir("accept-det");
  write_json(dir / "spec.json", Json(y_branch_spec({40, 40, 40}, 3)));
  auto run = [&](const std::string& out, const std::string& threads) {
    std::ostringstream o, e;
    return cli::run_subcommand({"--threads", threads, "pipeline", "--phantom",
                                (dir / "spec.json").string(), "--out", (dir / out).string()},
                               o, e);
  };
  if (run("a", "1") != 0 || run("b", "1") != 0 || run("c", "8") != 0) {
    return {false, "pipeline run failed"};
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    const std::string ref = testutil::slurp(entry.path());
    for (const char* other : {"b", "c"}) {
      const fs::path p = dir / other / name;
      differing += !fs::exists(p) || testutil::slurp(p) != ref;
    }
    ++files;
  }
  for (const char* other : {"b", "c"}) {
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir / other)) ++n;
    differing += n != files;
  }
  return {differing == 0 && files >= 9, std::to_string(files) + " files, " +
                                            std::to_string(differing) +
                                            " differences across reruns and 1 vs 8 threads"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"back-projection soundness", back_projection_soundness},
      {"region-growing containment", region_growing_containment},
      {"background-set correctness", background_set_correctness},
      {"CL fixed point", cl_fixed_point},
      {"CL/UE noise reduction", noise_reduction},
      {"gather equality", gather_equality},
      {"loss gradients", loss_gradients},
      {"metrics", metrics_oracles},
      {"entropy bounds and edge values", entropy_bounds},
      {"MetaImage I/O", metaimage_io},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << (criteria.size() - failed) << "/"
            << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
