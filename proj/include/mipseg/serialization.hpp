#pragma once

#include <filesystem>

#include <json.hpp>

#include "mipseg/metrics.hpp"
#include "mipseg/phantom.hpp"
#include "mipseg/pipeline.hpp"
#include "mipseg/pseudolabel.hpp"
#include "mipseg/refine.hpp"

namespace mipseg {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const GrowConfig& c);
void from_json(const Json& j, GrowConfig& c);
void to_json(Json& j, const BackgroundConfig& c);
void from_json(const Json& j, BackgroundConfig& c);
void to_json(Json& j, const RefineConfig& c);
void from_json(const Json& j, RefineConfig& c);
void to_json(Json& j, const OracleConfig& c);
void from_json(const Json& j, OracleConfig& c);
void to_json(Json& j, const PipelineConfig& c);
void from_json(const Json& j, PipelineConfig& c);
void to_json(Json& j, const PhantomSpec& s);
void from_json(const Json& j, PhantomSpec& s);
void to_json(Json& j, const RefinementReport& r);
void to_json(Json& j, const MetricReport& r);

// {"v_ave": ..., "dims": [nx, ny, nz], "conflicts": [[x, y, z], ...]}
struct ConflictFile {
  double v_ave = 0;
  Dims dims;
  VoxelSet conflicts;
};
void to_json(Json& j, const ConflictFile& c);
void from_json(const Json& j, ConflictFile& c);

Json read_json(const std::filesystem::path& path);
// Two-space indent, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mipseg
