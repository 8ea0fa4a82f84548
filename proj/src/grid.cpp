#include "mipseg/grid.hpp"

#include <algorithm>
#include <iterator>
#include <string>

namespace mipseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimsMismatch: return "dims-mismatch";
    case ErrorCode::kMissingPayload: return "missing-payload";
    case ErrorCode::kSizeMismatch: return "size-mismatch";
    case ErrorCode::kUnsupportedElementType: return "unsupported-element-type";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kNonFiniteValue: return "non-finite-value";
    case ErrorCode::kDegenerateRange: return "degenerate-range";
    case ErrorCode::kEmptySet: return "empty-set";
    case ErrorCode::kEmptyClass: return "empty-class";
    case ErrorCode::kDegenerateConfidentLearning: return "degenerate-confident-learning";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kMalformedPng: return "malformed-png";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kDegenerateConfidentLearning:
      return false;
    default:
      return true;
  }
}

void validate_dims(const Dims& dims) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "dims must be positive, got " + std::to_string(dims.nx) + "x" +
                    std::to_string(dims.ny) + "x" + std::to_string(dims.nz));
  }
}

void validate_spacing(const Spacing& s) {
  for (double v : {s.sx, s.sy, s.sz}) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "spacing must be positive and finite");
    }
  }
}

ProbabilityVolume::ProbabilityVolume(Dims dims, Spacing spacing, std::vector<float> p)
    : ProbabilityVolume(Grid<float>(dims, spacing, std::move(p))) {}

ProbabilityVolume::ProbabilityVolume(Grid<float> grid) : Grid<float>(std::move(grid)) {
  for (float v : values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error(ErrorCode::kOutOfRange, "probability outside [0,1]");
    }
  }
}

VoxelSet::VoxelSet(std::vector<Index> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

VoxelSet VoxelSet::from_mask(const BinaryVolume& mask) {
  VoxelSet out;
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) out.indices_.push_back(i);
  }
  return out;
}

VoxelSet VoxelSet::where(const LabelVolume& labels, Label label) {
  VoxelSet out;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.indices_.push_back(i);
  }
  return out;
}

bool VoxelSet::contains(Index i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

BinaryVolume VoxelSet::to_mask(Dims dims, Spacing spacing) const {
  BinaryVolume mask(dims, spacing, std::uint8_t{0});
  for (Index i : indices_) {
    if (i >= mask.size()) {
      throw Error(ErrorCode::kOutOfRange, "voxel index outside volume");
    }
    mask[i] = 1;
  }
  return mask;
}

VoxelSet set_union(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet out;
  out.indices_.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out.indices_));
  return out;
}

VoxelSet set_intersection(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out.indices_));
  return out;
}

VoxelSet set_difference(const VoxelSet& a, const VoxelSet& b) {
  VoxelSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out.indices_));
  return out;
}

}  // namespace mipseg
