#include "mipseg/metaimage.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace mipseg {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

bool parse_bool(const std::string& v) {
  std::string lower(v);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "true" || lower == "1";
}

template <class T>
T parse_number(const std::string& word, const char* key) {
  T value{};
  const auto* end = word.data() + word.size();
  auto [ptr, ec] = std::from_chars(word.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kMalformedHeader,
                std::string("cannot parse ") + key + " value '" + word + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ElementType parse_element_type(const std::string& v) {
  if (v == "MET_UCHAR") return ElementType::kUChar;
  if (v == "MET_SHORT") return ElementType::kShort;
  if (v == "MET_USHORT") return ElementType::kUShort;
  if (v == "MET_FLOAT") return ElementType::kFloat;
  throw Error(ErrorCode::kUnsupportedElementType, "unsupported ElementType " + v);
}

std::size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::kUChar: return 1;
    case ElementType::kShort:
    case ElementType::kUShort: return 2;
    case ElementType::kFloat: return 4;
  }
  return 0;
}

template <class T>
std::vector<T> decode(const std::vector<char>& bytes, std::size_t count, bool msb) {
  std::vector<T> out(count);
  std::memcpy(out.data(), bytes.data(), count * sizeof(T));
  const bool host_msb = std::endian::native == std::endian::big;
  if constexpr (sizeof(T) > 1) {
    if (msb != host_msb) {
      auto* raw = reinterpret_cast<unsigned char*>(out.data());
      for (std::size_t i = 0; i < count; ++i) {
        std::reverse(raw + i * sizeof(T), raw + (i + 1) * sizeof(T));
      }
    }
  }
  return out;
}

std::vector<char> read_all(std::istream& in) {
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_le(std::ostream& out, const MetaPayload& payload) {
  std::visit(
      [&](const auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
          out.write(reinterpret_cast<const char*>(vec.data()),
                    static_cast<std::streamsize>(vec.size() * sizeof(T)));
        } else {
          for (const T& v : vec) {
            char b[sizeof(T)];
            std::memcpy(b, &v, sizeof(T));
            std::reverse(b, b + sizeof(T));
            out.write(b, sizeof(T));
          }
        }
      },
      payload);
}

template <class T>
Grid<T> to_grid(const MetaImage& img, auto convert) {
  std::vector<T> data(img.element_count());
  std::visit(
      [&](const auto& vec) {
        for (std::size_t i = 0; i < vec.size(); ++i) data[i] = convert(vec[i]);
      },
      img.payload);
  return Grid<T>(img.dims, img.spacing, std::move(data));
}

void check_finite(std::span<const float> values, const char* what) {
  for (float v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteValue, std::string(what) + " contains NaN or Inf");
    }
  }
}

}  // namespace

const char* to_string(ElementType type) {
  switch (type) {
    case ElementType::kUChar: return "MET_UCHAR";
    case ElementType::kShort: return "MET_SHORT";
    case ElementType::kUShort: return "MET_USHORT";
    case ElementType::kFloat: return "MET_FLOAT";
  }
  return "MET_UNKNOWN";
}

ElementType MetaImage::element_type() const {
  return static_cast<ElementType>(payload.index());
}

std::size_t MetaImage::element_count() const {
  return std::visit([](const auto& v) { return v.size(); }, payload);
}

MetaImage read_metaimage(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());

  std::map<std::string, std::string> keys;
  std::string data_file;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (trim(line).empty()) continue;
      throw Error(ErrorCode::kMalformedHeader, "header line without '=': " + line);
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "ElementDataFile") {
      data_file = value;
      break;
    }
    keys[key] = value;
  }
  if (data_file.empty()) {
    throw Error(ErrorCode::kMalformedHeader, "header has no ElementDataFile");
  }

  auto get = [&](const char* key) -> const std::string* {
    auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
  };
  if (const auto* ndims = get("NDims"); !ndims || *ndims != "3") {
    throw Error(ErrorCode::kMalformedHeader, "only NDims = 3 is supported");
  }
  if (const auto* c = get("CompressedData"); c && parse_bool(*c)) {
    throw Error(ErrorCode::kUnsupportedElementType, "compressed MetaImage is not supported");
  }
  const auto* dim_size = get("DimSize");
  const auto* element_type = get("ElementType");
  if (!dim_size || !element_type) {
    throw Error(ErrorCode::kMalformedHeader, "header lacks DimSize or ElementType");
  }
  const auto dim_words = split_words(*dim_size);
  if (dim_words.size() != 3) {
    throw Error(ErrorCode::kMalformedHeader, "DimSize needs three values");
  }
  MetaImage img;
  img.dims = {parse_number<int>(dim_words[0], "DimSize"), parse_number<int>(dim_words[1], "DimSize"),
              parse_number<int>(dim_words[2], "DimSize")};
  validate_dims(img.dims);
  const auto* spacing = get("ElementSpacing");
  if (!spacing) spacing = get("ElementSize");
  if (spacing) {
    const auto w = split_words(*spacing);
    if (w.size() != 3) throw Error(ErrorCode::kMalformedHeader, "ElementSpacing needs three values");
    img.spacing = {parse_number<double>(w[0], "ElementSpacing"),
                   parse_number<double>(w[1], "ElementSpacing"),
                   parse_number<double>(w[2], "ElementSpacing")};
    validate_spacing(img.spacing);
  }
  bool msb = false;
  if (const auto* b = get("BinaryDataByteOrderMSB")) msb = parse_bool(*b);
  if (const auto* b = get("ElementByteOrderMSB")) msb = parse_bool(*b);
  const ElementType type = parse_element_type(*element_type);

  std::vector<char> bytes;
  if (data_file == "LOCAL") {
    bytes = read_all(in);
  } else {
    const fs::path raw = path.parent_path() / data_file;
    std::ifstream rin(raw, std::ios::binary);
    if (!rin) throw Error(ErrorCode::kMissingPayload, "payload file not found: " + raw.string());
    bytes = read_all(rin);
  }
  const std::size_t count = img.dims.size();
  const std::size_t expected = count * element_size(type);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kSizeMismatch, "payload has " + std::to_string(bytes.size()) +
                                              " bytes, header implies " + std::to_string(expected));
  }
  switch (type) {
    case ElementType::kUChar: img.payload = decode<std::uint8_t>(bytes, count, msb); break;
    case ElementType::kShort: img.payload = decode<std::int16_t>(bytes, count, msb); break;
    case ElementType::kUShort: img.payload = decode<std::uint16_t>(bytes, count, msb); break;
    case ElementType::kFloat: img.payload = decode<float>(bytes, count, msb); break;
  }
  return img;
}

void write_metaimage(const fs::path& path, const MetaImage& image) {
  validate_dims(image.dims);
  validate_spacing(image.spacing);
  if (image.element_count() != image.dims.size()) {
    throw Error(ErrorCode::kSizeMismatch, "payload length does not match dims");
  }
  const bool local = path.extension() == ".mha";
  fs::path raw = path;
  raw.replace_extension(".raw");

  std::ostringstream header;
  header << "ObjectType = Image\n"
         << "NDims = 3\n"
         << "BinaryData = True\n"
         << "BinaryDataByteOrderMSB = False\n"
         << "CompressedData = False\n"
         << "DimSize = " << image.dims.nx << ' ' << image.dims.ny << ' ' << image.dims.nz << '\n'
         << "ElementSpacing = " << format_double(image.spacing.sx) << ' '
         << format_double(image.spacing.sy) << ' ' << format_double(image.spacing.sz) << '\n'
         << "ElementType = " << to_string(image.element_type()) << '\n'
         << "ElementDataFile = " << (local ? std::string("LOCAL") : raw.filename().string())
         << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::string text = header.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (local) {
    write_le(out, image.payload);
  } else {
    std::ofstream rout(raw, std::ios::binary | std::ios::trunc);
    if (!rout) throw Error(ErrorCode::kIo, "cannot write " + raw.string());
    write_le(rout, image.payload);
    if (!rout) throw Error(ErrorCode::kIo, "write failed: " + raw.string());
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

ScalarVolume load_volume(const fs::path& path) {
  auto vol = to_grid<float>(read_metaimage(path), [](auto v) { return static_cast<float>(v); });
  check_finite(vol.values(), path.string().c_str());
  return vol;
}

LabelVolume load_labels(const fs::path& path) {
  return to_grid<Label>(read_metaimage(path), [&](auto v) {
    if (!(v == 0 || v == 1 || v == 2)) {
      throw Error(ErrorCode::kOutOfRange, "label volume values must be 0, 1 or 2: " + path.string());
    }
    return static_cast<Label>(static_cast<int>(v));
  });
}

ProbabilityVolume load_probability(const fs::path& path) {
  auto grid = to_grid<float>(read_metaimage(path), [](auto v) { return static_cast<float>(v); });
  check_finite(grid.values(), path.string().c_str());
  return ProbabilityVolume(std::move(grid));
}

BinaryVolume load_binary(const fs::path& path) {
  return to_grid<std::uint8_t>(read_metaimage(path),
                               [](auto v) { return static_cast<std::uint8_t>(v != 0); });
}

void save_volume(const ScalarVolume& volume, const fs::path& path) {
  check_finite(volume.values(), "volume");
  write_metaimage(path, {volume.dims(), volume.spacing(), volume.data()});
}

void save_volume(const LabelVolume& labels, const fs::path& path) {
  std::vector<std::uint8_t> bytes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) bytes[i] = static_cast<std::uint8_t>(labels[i]);
  write_metaimage(path, {labels.dims(), labels.spacing(), std::move(bytes)});
}

void save_volume(const ProbabilityVolume& prob, const fs::path& path) {
  check_finite(prob.values(), "probability volume");
  write_metaimage(path, {prob.dims(), prob.spacing(), prob.data()});
}

void save_volume(const BinaryVolume& mask, const fs::path& path) {
  write_metaimage(path, {mask.dims(), mask.spacing(), mask.data()});
}

}  // namespace mipseg
