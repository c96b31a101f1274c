#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "tipgen/error.hpp"
#include "tipgen/morphology.hpp"
#include "tipgen/raster.hpp"

namespace tipgen {

inline constexpr int kDefaultBackgroundThreshold = 245;
inline constexpr Rgb kWhite{255, 255, 255};

/// Isolated threat object: tight crop, its silhouette, class label and the
/// rotation applied so far. Raster pixels outside the silhouette are white.
struct ThreatSignature {
  RgbImage image;
  BinaryMask foreground;
  std::string label;
  double theta = 0.0;

  int width() const noexcept { return image.width(); }
  int height() const noexcept { return image.height(); }
};

namespace detail {

inline ThreatSignature finish_signature(const RgbImage& image, const BinaryMask& fg, std::string label,
                                        double theta) {
  const Box box = bounding_box(fg);
  if (box.width == 0) throw Error(ErrorKind::EmptySignature, "signature has no foreground pixels");
  ThreatSignature sig{crop(image, box), crop(fg, box), std::move(label), theta};
  for (int r = 0; r < sig.height(); ++r)
    for (int c = 0; c < sig.width(); ++c)
      if (!sig.foreground.test(r, c)) sig.image.set_pixel(r, c, kWhite);
  return sig;
}

inline ThreatSignature quarter_turn(const ThreatSignature& sig, int quarters, double theta) {
  const int w = sig.width(), h = sig.height();
  const bool swap = quarters % 2 != 0;
  const int ow = swap ? h : w, oh = swap ? w : h;
  RgbImage img(ow, oh);
  BinaryMask fg(ow, oh);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int r = i, c = j;
      switch (quarters) {
        case 1: r = w - 1 - j; c = i; break;          // counter-clockwise
        case 2: r = h - 1 - i; c = w - 1 - j; break;
        case 3: r = j; c = h - 1 - i; break;
        default: break;
      }
      img.set_pixel(r, c, sig.image.pixel(i, j));
      fg.set(r, c, sig.foreground.test(i, j));
    }
  return {std::move(img), std::move(fg), sig.label, theta};
}

}  // namespace detail

/// Canvas size that holds a w x h raster rotated by `theta_deg`.
inline std::pair<int, int> rotated_canvas(int w, int h, double theta_deg) {
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double c = std::abs(std::cos(rad)), s = std::abs(std::sin(rad));
  // The epsilon keeps float noise at exact multiples of 90 from adding a column.
  const int cw = static_cast<int>(std::ceil(w * c + h * s - 1e-9));
  const int ch = static_cast<int>(std::ceil(w * s + h * c - 1e-9));
  return {std::max(cw, 1), std::max(ch, 1)};
}

/// Silhouette = greyscale strictly below `background_threshold`; raster and
/// mask are cropped to its bounding box.
inline ThreatSignature extract_signature(const RgbImage& scan, std::string label,
                                         int background_threshold = kDefaultBackgroundThreshold) {
  return detail::finish_signature(scan, binarise(to_grayscale(scan), background_threshold), std::move(label), 0.0);
}

/// Rotates counter-clockwise (as displayed) about the centre. Raster is
/// resampled bilinearly onto the expanded canvas with white fill, the mask by
/// nearest neighbour; the result is re-cropped to the rotated silhouette.
inline ThreatSignature rotate_signature(const ThreatSignature& sig, double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg < 360.0))
    throw Error(ErrorKind::Domain, "rotation angle must lie in [0, 360), got " + std::to_string(theta_deg));
  const double total = std::fmod(sig.theta + theta_deg, 360.0);
  if (theta_deg == 0.0 || theta_deg == 90.0 || theta_deg == 180.0 || theta_deg == 270.0) {
    if (theta_deg == 0.0) {
      ThreatSignature out = sig;
      out.theta = total;
      return out;
    }
    return detail::quarter_turn(sig, static_cast<int>(theta_deg) / 90, total);
  }

  const int w = sig.width(), h = sig.height();
  const auto [cw, ch] = rotated_canvas(w, h, theta_deg);
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double scx = (w - 1) / 2.0, scy = (h - 1) / 2.0;
  const double dcx = (cw - 1) / 2.0, dcy = (ch - 1) / 2.0;

  auto sample = [&](int r, int c, int k) -> double {
    if (r < 0 || c < 0 || r >= h || c >= w) return 255.0;
    return sig.image.at(r, c, k);
  };

  RgbImage img(cw, ch, 255);
  BinaryMask fg(cw, ch);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const double ox = x - dcx, oy = y - dcy;
      const double sx = ox * cs - oy * sn + scx;
      const double sy = ox * sn + oy * cs + scy;

      const long nr = std::lround(sy), nc = std::lround(sx);
      if (nr >= 0 && nc >= 0 && nr < h && nc < w && sig.foreground.test(static_cast<int>(nr), static_cast<int>(nc)))
        fg.set(y, x);

      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      if (x0 + 1 < 0 || y0 + 1 < 0 || x0 >= w || y0 >= h) continue;
      const double fx = sx - x0, fy = sy - y0;
      for (int k = 0; k < 3; ++k) {
        const double top = sample(y0, x0, k) * (1 - fx) + sample(y0, x0 + 1, k) * fx;
        const double bottom = sample(y0 + 1, x0, k) * (1 - fx) + sample(y0 + 1, x0 + 1, k) * fx;
        const double v = std::round(top * (1 - fy) + bottom * fy);
        img.at(y, x, k) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return detail::finish_signature(img, fg, sig.label, total);
}

struct LibraryEntry {
  std::filesystem::path path;
  ThreatSignature signature;
};

/// Threat library layout: `<root>/<ClassName>/*.png`, sorted by file name.
using ThreatLibrary = std::map<std::string, std::vector<LibraryEntry>>;

inline ThreatLibrary load_threat_library(const std::filesystem::path& root,
                                         int background_threshold = kDefaultBackgroundThreshold) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorKind::Io, "threat library not found: " + root.string());
  ThreatLibrary lib;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir.path()))
      if (f.is_regular_file() && f.path().extension() == ".png") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    auto& entries = lib[dir.path().filename().string()];
    for (const auto& f : files) {
      try {
        entries.push_back({f, extract_signature(load_image(f), dir.path().filename().string(), background_threshold)});
      } catch (const Error& e) {
        throw e.with_context(f.string());
      }
    }
  }
  return lib;
}

}  // namespace tipgen
