#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mipseg/projection.hpp"
#include "mipseg/pseudolabel.hpp"
#include "mipseg/refine.hpp"

namespace mipseg {

// Synthesized network outputs, used when no probability volumes are given
// and ground truth is known.
struct OracleConfig {
  double quality = 0.9;
  double pass_noise = 0.05;
  std::uint64_t seed = 7;

  friend bool operator==(const OracleConfig&, const OracleConfig&) = default;
};

struct PipelineConfig {
  // Either a phantom spec or a volume (plus mask, or ground truth to derive it).
  std::string phantom;
  std::string volume;
  std::string mask;
  std::string ground_truth;
  std::string probability;
  std::vector<std::string> passes;
  Axis axis = Axis::kZ;
  bool normalize = true;
  GrowConfig grow;
  BackgroundConfig background;
  RefineConfig refine;
  OracleConfig oracle;
  int rounds = 1;
  std::string output_dir = "out";

  // Checks parameter ranges and that every referenced input file exists.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Same defaults with priors disabled (all four prior thresholds infinite).
PipelineConfig tubetk_profile(PipelineConfig base = {});

struct PipelineSummary {
  std::vector<std::filesystem::path> written;
};

// Writes into output_dir: volume.mhd, [gt.mhd], mip.png, mask.png,
// labels.mhd, conflicts.json, refined.mhd, report.json, [metrics.json].
PipelineSummary run_pipeline(const PipelineConfig& cfg);

}  // namespace mipseg
