#include "mipseg/pipeline.hpp"

#include <optional>

#include "mipseg/metaimage.hpp"
#include "mipseg/metrics.hpp"
#include "mipseg/phantom.hpp"
#include "mipseg/serialization.hpp"
#include "mipseg/volume_ops.hpp"

namespace mipseg {
namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path, const char* what) {
  if (!path.empty() && !fs::is_regular_file(path)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " not found: " + path);
  }
}

BinaryVolume foreground_mask(const LabelVolume& labels) {
  BinaryVolume out(labels.dims(), labels.spacing(), std::uint8_t{0});
  for (Index i = 0; i < labels.size(); ++i) out[i] = labels[i] == Label::kForeground;
  return out;
}

// Metrics are undefined for an empty prediction; report them as null.
Json score(const LabelVolume& labels, const BinaryVolume& gt) {
  const BinaryVolume pred = foreground_mask(labels);
  if (VoxelSet::from_mask(pred).empty()) return Json(nullptr);
  return Json(evaluate(pred, gt));
}

}  // namespace

void PipelineConfig::validate() const {
  if (phantom.empty() == volume.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "set exactly one of 'phantom' or 'volume'");
  }
  require_file(phantom, "phantom spec");
  require_file(volume, "volume");
  require_file(mask, "mask");
  require_file(ground_truth, "ground truth");
  require_file(probability, "probability");
  for (const auto& p : passes) require_file(p, "prediction pass");
  if (!phantom.empty() && !ground_truth.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "a phantom carries its own ground truth");
  }
  const bool has_gt = !phantom.empty() || !ground_truth.empty();
  if (mask.empty() && !has_gt) {
    throw Error(ErrorCode::kInvalidArgument, "a mask is required when no ground truth is given");
  }
  if (probability.empty() != passes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "'probability' and 'passes' must be given together");
  }
  if (probability.empty() && !has_gt) {
    throw Error(ErrorCode::kInvalidArgument,
                "probability volumes are required when no ground truth is given");
  }
  if (!passes.empty() && passes.size() != static_cast<std::size_t>(refine.passes)) {
    throw Error(ErrorCode::kInvalidArgument, "number of passes does not match refine.K");
  }
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds must be at least 1");
  if (!(oracle.quality > 0.5 && oracle.quality <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "oracle quality must be in (0.5, 1]");
  }
  if (!(oracle.pass_noise >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "oracle pass_noise must be nonnegative");
  }
  if (output_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "output_dir is empty");
  grow.validate();
  background.validate();
  refine.validate();
}

PipelineConfig tubetk_profile(PipelineConfig base) {
  base.refine.disable_priors = true;
  return base;
}

PipelineSummary run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  PipelineSummary summary;
  auto written = [&](const char* name) {
    summary.written.push_back(out / name);
    return out / name;
  };

  ScalarVolume volume;
  std::optional<BinaryVolume> gt;
  if (!cfg.phantom.empty()) {
    PhantomSpec spec;
    from_json(read_json(cfg.phantom), spec);
    Phantom ph = generate_phantom(spec);
    volume = std::move(ph.volume);
    gt = std::move(ph.ground_truth);
  } else {
    volume = load_volume(cfg.volume);
    if (!cfg.ground_truth.empty()) {
      gt = load_binary(cfg.ground_truth);
      require_same_dims(volume, *gt, "ground truth");
    }
  }
  if (cfg.normalize) volume = normalize_intensity(volume);
  save_volume(volume, written("volume.mhd"));
  if (gt) save_volume(*gt, written("gt.mhd"));

  const Mip2D mip = mip_project(volume, cfg.axis);
  export_png(mip, written("mip.png"));
  const Mask2D annotation = cfg.mask.empty() ? project_mask(*gt, cfg.axis)
                                             : import_mask_png(cfg.mask, mip.width, mip.height);
  export_mask_png(annotation, written("mask.png"));

  const PseudoLabelResult pl = generate_pseudolabel(volume, annotation, mip, cfg.grow, cfg.background);
  save_volume(pl.assembled.labels, written("labels.mhd"));
  write_json(written("conflicts.json"),
             Json(ConflictFile{pl.v_ave, volume.dims(), pl.assembled.conflicts}));

  ProbabilityVolume clean;
  std::vector<ProbabilityVolume> passes;
  if (!cfg.probability.empty()) {
    clean = load_probability(cfg.probability);
    require_same_dims(volume, clean, "probability");
    for (const auto& p : cfg.passes) {
      passes.push_back(load_probability(p));
      require_same_dims(volume, passes.back(), "prediction pass");
    }
  } else {
    OracleOutputs oracle = oracle_probabilities(*gt, cfg.oracle.quality, cfg.refine.passes,
                                                cfg.oracle.pass_noise, cfg.oracle.seed);
    clean = std::move(oracle.clean);
    passes = std::move(oracle.passes);
  }

  LabelVolume labels = pl.assembled.labels;
  VoxelSet conflicts = pl.assembled.conflicts;
  Json rounds = Json::array();
  for (int r = 0; r < cfg.rounds; ++r) {
    RefineResult res = refine_round(labels, conflicts, volume, clean, passes, pl.v_ave, cfg.refine);
    rounds.push_back(res.report);
    labels = std::move(res.labels);
    conflicts = VoxelSet();
  }
  save_volume(labels, written("refined.mhd"));
  write_json(written("report.json"), Json{{"v_ave", pl.v_ave},
                                          {"seeds", pl.seeds.size()},
                                          {"refine", cfg.refine},
                                          {"rounds", rounds}});

  if (gt) {
    write_json(written("metrics.json"), Json{{"pseudolabel", score(pl.assembled.labels, *gt)},
                                             {"refined", score(labels, *gt)}});
  }
  return summary;
}

}  // namespace mipseg
