#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "tipgen/error.hpp"

namespace tipgen {

/// Row-major 8-bit raster with a compile-time channel count.
template <int Channels>
class Image {
  static_assert(Channels == 1 || Channels == 3);

 public:
  static constexpr int channels = Channels;
  using Pixel = std::array<std::uint8_t, Channels>;

  Image() = default;

  Image(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}

  Image(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height))
      throw Error(ErrorKind::Domain, "pixel buffer length does not match dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int row, int col, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * Channels + c];
  }
  std::uint8_t at(int row, int col, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * Channels + c];
  }

  Pixel pixel(int row, int col) const noexcept {
    Pixel p;
    for (int c = 0; c < Channels; ++c) p[c] = at(row, col, c);
    return p;
  }
  void set_pixel(int row, int col, const Pixel& p) noexcept {
    for (int c = 0; c < Channels; ++c) at(row, col, c) = p[c];
  }

  std::span<const std::uint8_t> samples() const noexcept { return data_; }
  std::span<std::uint8_t> samples() noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 1 || height < 1)
      throw Error(ErrorKind::Domain, "image dimensions must be positive, got " +
                                         std::to_string(width) + "x" + std::to_string(height));
    return static_cast<std::size_t>(width) * height * Channels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using RgbImage = Image<3>;
using GrayImage = Image<1>;
using Rgb = RgbImage::Pixel;

/// Row-major boolean grid. Stored one byte per cell.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw Error(ErrorKind::Domain, "mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool test(int row, int col) const noexcept {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  /// Out-of-bounds cells read as unset.
  bool test_or_unset(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_ && test(row, col);
  }
  void set(int row, int col, bool value = true) noexcept {
    bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool any() const noexcept {
    return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
  }

  /// True when every set bit of *this is also set in `other` (same dims required).
  bool subset_of(const BinaryMask& other) const noexcept {
    if (width_ != other.width_ || height_ != other.height_) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i]) return false;
    return true;
  }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) b = b ? 0 : 1;
    return out;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Inclusive-exclusive pixel box: x = column, y = row.
struct Box {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool operator==(const Box&) const = default;
  long long area() const noexcept { return static_cast<long long>(width) * height; }
  bool contains(int row, int col) const noexcept {
    return col >= x && col < x + width && row >= y && row < y + height;
  }
};

/// Tight bounding box of the set bits; width/height 0 when the mask is empty.
inline Box bounding_box(const BinaryMask& mask) {
  int top = mask.height(), bottom = -1, left = mask.width(), right = -1;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.test(r, c)) {
        top = std::min(top, r);
        bottom = std::max(bottom, r);
        left = std::min(left, c);
        right = std::max(right, c);
      }
  if (bottom < 0) return {};
  return {left, top, right - left + 1, bottom - top + 1};
}

template <int C>
Image<C> crop(const Image<C>& img, const Box& box) {
  Image<C> out(box.width, box.height);
  for (int r = 0; r < box.height; ++r)
    for (int c = 0; c < box.width; ++c) out.set_pixel(r, c, img.pixel(box.y + r, box.x + c));
  return out;
}

inline BinaryMask crop(const BinaryMask& mask, const Box& box) {
  BinaryMask out(box.width, box.height);
  for (int r = 0; r < box.height; ++r)
    for (int c = 0; c < box.width; ++c) out.set(r, c, mask.test(box.y + r, box.x + c));
  return out;
}

/// Rec.601 luma, round half away from zero. Integer form so ties are exact.
constexpr std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}
constexpr std::uint8_t luma(const Rgb& p) noexcept { return luma(p[0], p[1], p[2]); }

inline GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  auto src = img.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  return out;
}

inline GrayImage mask_to_gray(const BinaryMask& mask) {
  GrayImage out(mask.width(), mask.height());
  auto bits = mask.bits();
  auto dst = out.samples();
  for (std::size_t i = 0; i < bits.size(); ++i) dst[i] = bits[i] ? 255 : 0;
  return out;
}

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed for " + path.string());
  return bytes;
}

inline bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline bool is_jpeg(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

inline RgbImage decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(ErrorKind::Decode, name + ": " + image.message);
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(ErrorKind::Decode, name + ": 16-bit PNG is not supported");
  }
  // Alpha is composited onto white so transparent threat crops read as background.
  image.format = PNG_FORMAT_RGB;
  png_color white{255, 255, 255};
  RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, &white, out.samples().data(), 0, nullptr))
    throw Error(ErrorKind::Decode, name + ": " + image.message);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline RgbImage decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& name) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = [](j_common_ptr info) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(info->err);
    (*info->err->format_message)(info, mgr->message);
    std::longjmp(mgr->jump, 1);
  };
  err.base.output_message = [](j_common_ptr) {};

  std::vector<std::uint8_t> pixels;
  int width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::Decode, name + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return RgbImage(width, height, std::move(pixels));
}

template <int C>
void write_png(const Image<C>& img, const std::filesystem::path& path) {
  auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent))
    throw Error(ErrorKind::Io, "directory does not exist: " + parent.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.samples().data(), 0, nullptr))
    throw Error(ErrorKind::Io, path.string() + ": " + image.message);
}

}  // namespace detail

/// Decodes a PNG or JPEG file. Greyscale input is replicated to RGB.
inline RgbImage load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (detail::is_png(bytes)) return detail::decode_png(bytes, path.string());
  if (detail::is_jpeg(bytes)) return detail::decode_jpeg(bytes, path.string());
  throw Error(ErrorKind::Decode, path.string() + ": not a PNG or JPEG file");
}

/// Lossless PNG output.
inline void save_image(const RgbImage& img, const std::filesystem::path& path) {
  detail::write_png(img, path);
}
inline void save_image(const GrayImage& img, const std::filesystem::path& path) {
  detail::write_png(img, path);
}
inline void save_image(const BinaryMask& mask, const std::filesystem::path& path) {
  detail::write_png(mask_to_gray(mask), path);
}

}  // namespace tipgen
