#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "mipseg/projection.hpp"

namespace mipseg {
namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return f;
}

struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  int channels = 1;
  std::vector<std::uint8_t> bytes;  // rows of width*channels samples, 16-bit samples big-endian
};

void write_gray(const fs::path& path, int width, int height, int bit_depth,
                const std::vector<std::uint8_t>& bytes) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(width) * (bit_depth / 8);
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + r * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

GrayImage read_png(const fs::path& path) {
  auto file = open_file(path, "rb");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::kMalformedPng, "not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  GrayImage img;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kMalformedPng, "corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = png_get_bit_depth(png, info);
  img.channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  img.bytes.resize(row_bytes * static_cast<std::size_t>(img.height));
  for (int r = 0; r < img.height; ++r) {
    png_read_row(png, img.bytes.data() + r * row_bytes, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

void export_png(const Mip2D& mip, const fs::path& path) {
  std::vector<std::uint8_t> bytes(mip.intensity.size() * 2);
  for (std::size_t i = 0; i < mip.intensity.size(); ++i) {
    const double v = std::clamp(static_cast<double>(mip.intensity[i]), 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  write_gray(path, mip.width, mip.height, 16, bytes);
}

std::vector<float> import_intensity_png(const fs::path& path, int& width, int& height) {
  const GrayImage img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 16) {
    throw Error(ErrorCode::kMalformedPng, "expected 16-bit grayscale PNG: " + path.string());
  }
  width = img.width;
  height = img.height;
  std::vector<float> out(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned q = (unsigned{img.bytes[2 * i]} << 8) | img.bytes[2 * i + 1];
    out[i] = static_cast<float>(q / 65535.0);
  }
  return out;
}

Mask2D import_mask_png(const fs::path& path, int expected_width, int expected_height) {
  const GrayImage img = read_png(path);
  if (img.bit_depth != 8) {
    throw Error(ErrorCode::kMalformedPng, "mask PNG must be 8-bit: " + path.string());
  }
  if (img.width != expected_width || img.height != expected_height) {
    throw Error(ErrorCode::kDimsMismatch,
                "mask " + path.string() + " is " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + ", expected " + std::to_string(expected_width) +
                    "x" + std::to_string(expected_height));
  }
  // Alpha does not mark vessel pixels; any nonzero color sample does.
  const int color_channels = (img.channels == 2 || img.channels == 4) ? img.channels - 1 : img.channels;
  Mask2D mask(img.width, img.height);
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    const std::uint8_t* px = img.bytes.data() + p * static_cast<std::size_t>(img.channels);
    bool on = false;
    for (int c = 0; c < color_channels; ++c) on = on || px[c] != 0;
    mask.bits[p] = on ? 1 : 0;
  }
  return mask;
}

void export_mask_png(const Mask2D& mask, const fs::path& path) {
  std::vector<std::uint8_t> bytes(mask.bits.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.bits[i] ? 255 : 0;
  write_gray(path, mask.width, mask.height, 8, bytes);
}

}  // namespace mipseg
