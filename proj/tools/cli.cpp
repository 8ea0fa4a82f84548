#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "mipseg/fusion.hpp"
#include "mipseg/metaimage.hpp"
#include "mipseg/metrics.hpp"
#include "mipseg/parallel.hpp"
#include "mipseg/phantom.hpp"
#include "mipseg/pipeline.hpp"
#include "mipseg/projection.hpp"
#include "mipseg/pseudolabel.hpp"
#include "mipseg/refine.hpp"
#include "mipseg/serialization.hpp"
#include "mipseg/volume_ops.hpp"

namespace mipseg::cli {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ScalarVolume read_intensity(const std::string& path, bool raw) {
  ScalarVolume v = load_volume(path);
  return raw ? v : normalize_intensity(v);
}

// Level-0 argmax index map: an integer MetaImage of DimSize (W, H, 1).
Mip2D read_index_map(const std::string& path, Axis axis, const Dims& source) {
  const MetaImage img = read_metaimage(path);
  if (img.element_type() == ElementType::kFloat) {
    throw Error(ErrorCode::kUnsupportedElementType, "index map must be an integer image: " + path);
  }
  Mip2D mip;
  mip.axis = axis;
  mip.source_dims = source;
  mip.width = projection_width(axis, source);
  mip.height = projection_height(axis, source);
  if (img.dims.nx != mip.width || img.dims.ny != mip.height || img.dims.nz != 1) {
    throw Error(ErrorCode::kDimsMismatch, "index map " + path + " does not match the " +
                                              std::to_string(mip.width) + "x" +
                                              std::to_string(mip.height) + " projection");
  }
  const int depth = mip.depth_extent();
  std::visit(
      [&](const auto& values) {
        for (const auto v : values) {
          if (v < 0 || static_cast<long>(v) >= depth) {
            throw Error(ErrorCode::kOutOfRange, "index map value outside [0, depth): " + path);
          }
          mip.index.push_back(static_cast<std::int32_t>(v));
        }
      },
      img.payload);
  return mip;
}

void write_index_map(const Mip2D& mip, const std::string& path) {
  std::vector<std::uint16_t> values(mip.index.begin(), mip.index.end());
  write_metaimage(path, MetaImage{{mip.width, mip.height, 1}, {}, std::move(values)});
}

Mask2D mask_for(const std::string& path, const Mip2D& mip) {
  return import_mask_png(path, mip.width, mip.height);
}

BinaryVolume binarize(const std::string& path, std::optional<double> threshold) {
  if (!threshold) return load_binary(path);
  const ScalarVolume v = load_volume(path);
  BinaryVolume out(v.dims(), v.spacing(), std::uint8_t{0});
  for (Index i = 0; i < v.size(); ++i) out[i] = v[i] >= *threshold;
  return out;
}

void emit(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool json = false;
  std::string profile;
};

RefineConfig refine_defaults(const Context& ctx) {
  RefineConfig cfg;
  if (ctx.profile == "tubetk") cfg.disable_priors = true;
  return cfg;
}

// The first positional token when it names no subcommand, else empty.
std::string unknown_subcommand(const CLI::App& app, const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--threads" || a == "--profile") {
      ++i;
      continue;
    }
    if (a.rfind("-", 0) == 0) continue;
    for (const auto* sub : app.get_subcommands({})) {
      if (sub->get_name() == a) return {};
    }
    return a;
  }
  return {};
}

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised 3D vessel segmentation from 2D MIP annotations", "mipseg"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Context ctx{out, err};
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default from MIPSEG_THREADS, else 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--profile", ctx.profile, "Parameter preset")->check(CLI::IsMember({"tubetk"}));
  app.add_flag("--json", ctx.json, "Print machine-readable results as JSON");

  std::string axis_name = "z";
  auto add_axis = [&](CLI::App* sub) {
    sub->add_option("--axis", axis_name, "Projection axis")->check(CLI::IsMember({"x", "y", "z"}));
  };
  bool raw = false;
  auto add_raw = [&](CLI::App* sub) {
    sub->add_flag("--raw", raw, "Skip per-volume min-max normalization");
  };

  // mip
  struct {
    std::string volume, out, index;
  } mip_opt;
  auto* mip_cmd = app.add_subcommand("mip", "Maximum intensity projection to 16-bit PNG");
  mip_cmd->add_option("--volume", mip_opt.volume)->check(CLI::ExistingFile)->required();
  mip_cmd->add_option("--out", mip_opt.out, "PNG path")->required();
  mip_cmd->add_option("--index", mip_opt.index, "Argmax index map (.mhd)");
  add_axis(mip_cmd);
  add_raw(mip_cmd);

  // backproject
  struct {
    std::string volume, mask, out;
  } bp_opt;
  auto* bp_cmd = app.add_subcommand("backproject", "Lift annotated pixels to seed voxels");
  bp_cmd->add_option("--volume", bp_opt.volume)->check(CLI::ExistingFile)->required();
  bp_cmd->add_option("--mask", bp_opt.mask, "8-bit PNG, nonzero = vessel")->check(CLI::ExistingFile)->required();
  bp_cmd->add_option("--out", bp_opt.out, "Seed mask (.mhd)")->required();
  add_axis(bp_cmd);
  add_raw(bp_cmd);

  // pseudolabel
  struct {
    std::string volume, mask, out, conflicts, config;
    GrowConfig grow;
    BackgroundConfig background;
    int connectivity = 26;
  } pl_opt;
  auto* pl_cmd = app.add_subcommand("pseudolabel", "3D pseudo-label from a 2D annotation");
  pl_cmd->add_option("--volume", pl_opt.volume)->check(CLI::ExistingFile)->required();
  pl_cmd->add_option("--mask", pl_opt.mask)->check(CLI::ExistingFile)->required();
  pl_cmd->add_option("--out", pl_opt.out, "Label volume (.mhd)")->required();
  pl_cmd->add_option("--conflicts", pl_opt.conflicts, "Conflict list and v_ave (.json)");
  pl_cmd->add_option("--config", pl_opt.config, "JSON with 'grow' and 'background' sections")->check(CLI::ExistingFile);
  auto* alpha_opt = pl_cmd->add_option("--alpha", pl_opt.grow.alpha, "Region-growing tolerance");
  auto* conn_opt = pl_cmd->add_option("--connectivity", pl_opt.connectivity)
                       ->check(CLI::IsMember({6, 26}));
  auto* beta_opt = pl_cmd->add_option("--beta-coef", pl_opt.background.beta_coef);
  auto* gamma_opt = pl_cmd->add_option("--gamma-coef", pl_opt.background.gamma_coef);
  auto* eta_opt = pl_cmd->add_option("--eta-coef", pl_opt.background.eta_coef);
  add_axis(pl_cmd);
  add_raw(pl_cmd);

  // refine
  struct {
    std::string labels, volume, prob, passes, config, out, report, conflicts;
    double v_ave = 0;
    int rounds = 1;
  } rf_opt;
  auto* rf_cmd = app.add_subcommand("refine", "Confident-learning and uncertainty refinement");
  rf_cmd->add_option("--labels", rf_opt.labels)->check(CLI::ExistingFile)->required();
  rf_cmd->add_option("--volume", rf_opt.volume)->check(CLI::ExistingFile)->required();
  rf_cmd->add_option("--prob", rf_opt.prob, "Clean foreground probability")->check(CLI::ExistingFile)->required();
  rf_cmd->add_option("--passes", rf_opt.passes, "Comma-separated stochastic passes")->required();
  rf_cmd->add_option("--config", rf_opt.config, "RefineConfig JSON")->check(CLI::ExistingFile);
  rf_cmd->add_option("--out", rf_opt.out)->required();
  rf_cmd->add_option("--report", rf_opt.report, "Report JSON path");
  rf_cmd->add_option("--conflicts", rf_opt.conflicts, "Conflict file from pseudolabel")->check(CLI::ExistingFile);
  auto* v_ave_opt = rf_cmd->add_option("--v-ave", rf_opt.v_ave, "Seed mean intensity");
  rf_cmd->add_option("--rounds", rf_opt.rounds)->check(CLI::PositiveNumber);
  add_raw(rf_cmd);

  // gather
  struct {
    std::string features, index, out;
    int channels = 1;
    int level = 0;
  } ga_opt;
  auto* ga_cmd = app.add_subcommand("gather", "Retrieve 2D features along the argmax index");
  ga_cmd->add_option("--features", ga_opt.features, "Channels stacked along z: (W, H, C*D)")->check(CLI::ExistingFile)
      ->required();
  ga_cmd->add_option("--channels", ga_opt.channels)->check(CLI::PositiveNumber);
  ga_cmd->add_option("--index", ga_opt.index, "Level-0 index map (.mhd)")->check(CLI::ExistingFile)->required();
  ga_cmd->add_option("--level", ga_opt.level)->check(CLI::Range(0, kMaxPyramidLevel));
  ga_cmd->add_option("--out", ga_opt.out, "(W, H, C) feature map (.mhd)")->required();

  // loss
  struct {
    std::string prob, labels, mask, index, prob2d;
    double lambda = 1.0;
  } ls_opt;
  auto* ls_cmd = app.add_subcommand("loss", "Evaluate the 3D and 2D training losses");
  ls_cmd->add_option("--prob", ls_opt.prob, "3D foreground probability")->check(CLI::ExistingFile)->required();
  ls_cmd->add_option("--labels", ls_opt.labels, "Pseudo-label volume")->check(CLI::ExistingFile)->required();
  ls_cmd->add_option("--mask", ls_opt.mask, "2D annotation PNG")->check(CLI::ExistingFile)->required();
  ls_cmd->add_option("--index", ls_opt.index, "Level-0 index map (.mhd)")->check(CLI::ExistingFile)->required();
  ls_cmd->add_option("--prob2d", ls_opt.prob2d, "2D probability, (W, H, 1)")->check(CLI::ExistingFile);
  ls_cmd->add_option("--lambda", ls_opt.lambda);
  add_axis(ls_cmd);

  // metrics
  struct {
    std::string pred, gt;
    std::optional<double> threshold;
  } mt_opt;
  auto* mt_cmd = app.add_subcommand("metrics", "DSC, clDice and AHD against ground truth");
  mt_cmd->add_option("--pred", mt_opt.pred)->check(CLI::ExistingFile)->required();
  mt_cmd->add_option("--gt", mt_opt.gt)->check(CLI::ExistingFile)->required();
  mt_cmd->add_option("--threshold", mt_opt.threshold, "Binarize pred at value >= threshold");

  // phantom
  struct {
    std::string spec, out, gt;
  } ph_opt;
  auto* ph_cmd = app.add_subcommand("phantom", "Synthetic vessel phantom with ground truth");
  ph_cmd->add_option("--spec", ph_opt.spec, "PhantomSpec JSON")->check(CLI::ExistingFile)->required();
  ph_cmd->add_option("--out", ph_opt.out)->required();
  ph_cmd->add_option("--gt", ph_opt.gt);

  // pipeline
  struct {
    std::string config, phantom, volume, mask, gt, prob, passes, out;
    int rounds = 1;
  } pp_opt;
  auto* pp_cmd = app.add_subcommand("pipeline", "End-to-end pseudo-label, refine and evaluate");
  pp_cmd->add_option("--config", pp_opt.config, "PipelineConfig JSON")->check(CLI::ExistingFile);
  auto* pp_phantom = pp_cmd->add_option("--phantom", pp_opt.phantom, "PhantomSpec JSON");
  auto* pp_volume = pp_cmd->add_option("--volume", pp_opt.volume);
  auto* pp_mask = pp_cmd->add_option("--mask", pp_opt.mask);
  auto* pp_gt = pp_cmd->add_option("--gt", pp_opt.gt);
  auto* pp_prob = pp_cmd->add_option("--prob", pp_opt.prob);
  auto* pp_passes = pp_cmd->add_option("--passes", pp_opt.passes);
  auto* pp_out = pp_cmd->add_option("--out", pp_opt.out, "Output directory");
  auto* pp_rounds = pp_cmd->add_option("--rounds", pp_opt.rounds)->check(CLI::PositiveNumber);
  auto* pp_axis = pp_cmd->add_option("--axis", axis_name)->check(CLI::IsMember({"x", "y", "z"}));

  std::vector<const char*> argv{"mipseg"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      if (const std::string bad = unknown_subcommand(app, args); !bad.empty()) {
        err << "error: unknown subcommand '" << bad << "'\n";
      } else {
        err << "error: " << e.what() << '\n';
      }
      if (app.get_subcommands().empty()) err << app.help();
      return 2;
    }

    if (threads > 0) set_thread_count(threads);
    const Axis axis = parse_axis(axis_name);

    if (*mip_cmd) {
      const ScalarVolume v = read_intensity(mip_opt.volume, raw);
      const Mip2D mip = mip_project(v, axis);
      export_png(mip, mip_opt.out);
      if (!mip_opt.index.empty()) write_index_map(mip, mip_opt.index);
      if (ctx.json) emit(out, Json{{"width", mip.width}, {"height", mip.height}, {"axis", axis_name}});
    } else if (*bp_cmd) {
      const ScalarVolume v = read_intensity(bp_opt.volume, raw);
      const Mip2D mip = mip_project(v, axis);
      const VoxelSet seeds = back_project(mask_for(bp_opt.mask, mip), mip);
      save_volume(seeds.to_mask(v.dims(), v.spacing()), bp_opt.out);
      if (ctx.json) emit(out, Json{{"seeds", seeds.size()}});
    } else if (*pl_cmd) {
      if (!pl_opt.config.empty()) {
        const Json j = read_json(pl_opt.config);
        GrowConfig grow = pl_opt.grow;
        BackgroundConfig bg = pl_opt.background;
        if (j.contains("grow")) from_json(j.at("grow"), grow);
        if (j.contains("background")) from_json(j.at("background"), bg);
        // Explicit flags win over the file.
        if (!alpha_opt->count()) pl_opt.grow.alpha = grow.alpha;
        if (!conn_opt->count()) pl_opt.connectivity = static_cast<int>(grow.connectivity);
        if (!beta_opt->count()) pl_opt.background.beta_coef = bg.beta_coef;
        if (!gamma_opt->count()) pl_opt.background.gamma_coef = bg.gamma_coef;
        if (!eta_opt->count()) pl_opt.background.eta_coef = bg.eta_coef;
      }
      pl_opt.grow.connectivity = static_cast<Connectivity>(pl_opt.connectivity);
      pl_opt.grow.validate();
      pl_opt.background.validate();
      const ScalarVolume v = read_intensity(pl_opt.volume, raw);
      const Mip2D mip = mip_project(v, axis);
      const PseudoLabelResult r =
          generate_pseudolabel(v, mask_for(pl_opt.mask, mip), mip, pl_opt.grow, pl_opt.background);
      save_volume(r.assembled.labels, pl_opt.out);
      const ConflictFile cf{r.v_ave, v.dims(), r.assembled.conflicts};
      if (!pl_opt.conflicts.empty()) write_json(pl_opt.conflicts, Json(cf));
      if (ctx.json) {
        emit(out, Json{{"v_ave", r.v_ave},
                       {"seeds", r.seeds.size()},
                       {"foreground", r.foreground.size()},
                       {"background", r.background.size()},
                       {"conflicts", r.assembled.conflicts.size()}});
      }
    } else if (*rf_cmd) {
      RefineConfig cfg = refine_defaults(ctx);
      if (!rf_opt.config.empty()) from_json(read_json(rf_opt.config), cfg);
      if (ctx.profile == "tubetk") cfg.disable_priors = true;
      cfg.validate();
      LabelVolume labels = load_labels(rf_opt.labels);
      const ScalarVolume v = read_intensity(rf_opt.volume, raw);
      const ProbabilityVolume clean = load_probability(rf_opt.prob);
      std::vector<ProbabilityVolume> passes;
      for (const auto& p : split_list(rf_opt.passes)) {
        if (!fs::is_regular_file(p)) throw Error(ErrorCode::kInvalidArgument, "pass not found: " + p);
        passes.push_back(load_probability(p));
      }
      VoxelSet conflicts;
      std::optional<double> v_ave;
      if (!rf_opt.conflicts.empty()) {
        ConflictFile cf;
        from_json(read_json(rf_opt.conflicts), cf);
        if (!(cf.dims == labels.dims())) {
          throw Error(ErrorCode::kDimsMismatch, "conflict file dims do not match the labels");
        }
        conflicts = cf.conflicts;
        v_ave = cf.v_ave;
      }
      if (v_ave_opt->count()) v_ave = rf_opt.v_ave;
      if (!v_ave) {
        const VoxelSet fg = VoxelSet::where(labels, Label::kForeground);
        if (fg.empty()) throw Error(ErrorCode::kEmptyClass, "no foreground labels to estimate v_ave");
        v_ave = foreground_mean(v, fg);
        err << "note: v_ave not given, using the foreground label mean " << *v_ave << '\n';
      }
      Json rounds = Json::array();
      for (int r = 0; r < rf_opt.rounds; ++r) {
        RefineResult res = refine_round(labels, conflicts, v, clean, passes, *v_ave, cfg);
        rounds.push_back(res.report);
        labels = std::move(res.labels);
        conflicts = VoxelSet();
      }
      save_volume(labels, rf_opt.out);
      const Json report{{"v_ave", *v_ave}, {"refine", cfg}, {"rounds", rounds}};
      if (!rf_opt.report.empty()) write_json(rf_opt.report, report);
      if (ctx.json) emit(out, report);
    } else if (*ga_cmd) {
      const FeatureGrid3D f3d = FeatureGrid3D::from_volume(load_volume(ga_opt.features), ga_opt.channels);
      const Mip2D mip = read_index_map(ga_opt.index, Axis::kZ, {f3d.width, f3d.height, f3d.depth});
      const FeatureGrid2D f2d = feature_retrieve(f3d, downscale_index(mip, ga_opt.level));
      save_volume(f2d.to_volume(), ga_opt.out);
      if (ctx.json) {
        emit(out, Json{{"channels", f2d.channels}, {"width", f2d.width}, {"height", f2d.height}});
      }
    } else if (*ls_cmd) {
      const ProbabilityVolume prob = load_probability(ls_opt.prob);
      const LabelVolume labels = load_labels(ls_opt.labels);
      require_same_dims(prob, labels, "loss");
      const Mip2D mip = read_index_map(ls_opt.index, axis, prob.dims());
      const Mask2D annotation = mask_for(ls_opt.mask, mip);
      const VoxelSet seeds = back_project(annotation, mip);
      const Loss3D l3 = loss_3d(prob, VoxelSet::where(labels, Label::kForeground), seeds,
                                VoxelSet::where(labels, Label::kBackground));
      for (const auto& w : l3.warnings) err << "warning: " << w << '\n';
      Image2D projected{mip.width, mip.height, {}};
      for (int b = 0; b < mip.height; ++b) {
        for (int a = 0; a < mip.width; ++a) {
          projected.values.push_back(prob.at(source_coord(axis, a, b, mip.index[mip.pixel(a, b)])));
        }
      }
      Json j{{"l3d", l3.value},
             {"l3d_foreground", l3.foreground},
             {"l3d_seeds", l3.seeds},
             {"l3d_background", l3.background}};
      double l2d = 0;
      if (!ls_opt.prob2d.empty()) {
        const ScalarVolume p2 = load_volume(ls_opt.prob2d);
        if (p2.dims() != Dims{mip.width, mip.height, 1}) {
          throw Error(ErrorCode::kDimsMismatch, "2D probability must have DimSize " +
                                                    std::to_string(mip.width) + " " +
                                                    std::to_string(mip.height) + " 1");
        }
        const Image2D direct{mip.width, mip.height, {p2.values().begin(), p2.values().end()}};
        const Loss2D l2 = loss_2d(projected, direct, annotation);
        l2d = l2.value;
        j["dice_projected"] = l2.projected.value;
        j["dice_direct"] = l2.direct.value;
      } else {
        l2d = dice_loss(projected, annotation).value;
        j["dice_projected"] = l2d;
        err << "note: no --prob2d, the 2D loss has only the projected term\n";
      }
      j["l2d"] = l2d;
      j["lambda"] = ls_opt.lambda;
      j["total"] = loss_all(l3.value, l2d, ls_opt.lambda);
      if (ctx.json) {
        emit(out, j);
      } else {
        out << "l3d " << l3.value << "\nl2d " << l2d << "\ntotal " << j["total"].get<double>() << '\n';
      }
    } else if (*mt_cmd) {
      const BinaryVolume pred = binarize(mt_opt.pred, mt_opt.threshold);
      const BinaryVolume gt = load_binary(mt_opt.gt);
      const MetricReport r = evaluate(pred, gt);
      if (ctx.json) {
        emit(out, Json(r));
      } else {
        out << "dsc " << r.dsc << "\ncldice " << r.cldice << "\nahd " << r.ahd << '\n';
      }
    } else if (*ph_cmd) {
      PhantomSpec spec;
      from_json(read_json(ph_opt.spec), spec);
      const Phantom ph = generate_phantom(spec);
      save_volume(ph.volume, ph_opt.out);
      if (!ph_opt.gt.empty()) save_volume(ph.ground_truth, ph_opt.gt);
      if (ctx.json) emit(out, Json{{"vessel_voxels", VoxelSet::from_mask(ph.ground_truth).size()}});
    } else if (*pp_cmd) {
      PipelineConfig cfg;
      if (!pp_opt.config.empty()) from_json(read_json(pp_opt.config), cfg);
      if (pp_phantom->count()) cfg.phantom = pp_opt.phantom;
      if (pp_volume->count()) cfg.volume = pp_opt.volume;
      if (pp_mask->count()) cfg.mask = pp_opt.mask;
      if (pp_gt->count()) cfg.ground_truth = pp_opt.gt;
      if (pp_prob->count()) cfg.probability = pp_opt.prob;
      if (pp_passes->count()) cfg.passes = split_list(pp_opt.passes);
      if (pp_out->count()) cfg.output_dir = pp_opt.out;
      if (pp_rounds->count()) cfg.rounds = pp_opt.rounds;
      if (pp_axis->count()) cfg.axis = axis;
      if (ctx.profile == "tubetk") cfg = tubetk_profile(cfg);
      const PipelineSummary s = run_pipeline(cfg);
      if (ctx.json) {
        Json files = Json::array();
        for (const auto& p : s.written) files.push_back(p.string());
        emit(out, Json{{"written", files}});
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mipseg::cli
