#pragma once

// MetaImage (.mhd + .raw, or self-contained .mha) reader/writer.
//
// Supported subset: NDims = 3, ElementType in {MET_UCHAR, MET_SHORT,
// MET_USHORT, MET_FLOAT}, uncompressed. Big-endian payloads are read when the
// header says so; everything written is little-endian.

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "mipseg/grid.hpp"

namespace mipseg {

enum class ElementType { kUChar, kShort, kUShort, kFloat };

const char* to_string(ElementType type);

using MetaPayload = std::variant<std::vector<std::uint8_t>, std::vector<std::int16_t>,
                                 std::vector<std::uint16_t>, std::vector<float>>;

struct MetaImage {
  Dims dims;
  Spacing spacing;
  MetaPayload payload;

  ElementType element_type() const;
  std::size_t element_count() const;

  friend bool operator==(const MetaImage&, const MetaImage&) = default;
};

MetaImage read_metaimage(const std::filesystem::path& path);
// A ".mha" path writes a single file; anything else writes <path> as header
// plus a sibling <stem>.raw.
void write_metaimage(const std::filesystem::path& path, const MetaImage& image);

// Integer payloads convert to float without rescaling. Non-finite values are
// rejected.
ScalarVolume load_volume(const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);
ProbabilityVolume load_probability(const std::filesystem::path& path);
BinaryVolume load_binary(const std::filesystem::path& path);

// Intensities and probabilities as MET_FLOAT; labels and masks as MET_UCHAR.
void save_volume(const ScalarVolume& volume, const std::filesystem::path& path);
void save_volume(const LabelVolume& labels, const std::filesystem::path& path);
void save_volume(const ProbabilityVolume& prob, const std::filesystem::path& path);
void save_volume(const BinaryVolume& mask, const std::filesystem::path& path);

}  // namespace mipseg
