#pragma once

// Procedural stand-ins for benign bag scans and isolated threat scans.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tipgen/raster.hpp"

namespace tipgen::fixtures {

inline void fill_rect(RgbImage& img, int top, int left, int h, int w, Rgb colour) {
  for (int r = std::max(0, top); r < std::min(img.height(), top + h); ++r)
    for (int c = std::max(0, left); c < std::min(img.width(), left + w); ++c) img.set_pixel(r, c, colour);
}

/// Near-white scanner background, one textured bag with clutter, and a few
/// isolated noise specks outside the bag.
inline RgbImage make_bag(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RgbImage img(width, height);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const auto v = static_cast<std::uint8_t>(uni(250, 255));
      img.set_pixel(r, c, {v, v, v});
    }
  const int mt = height / 8, ml = width / 10;
  const int bh = height - 2 * mt, bw = width - 2 * ml;
  const int corner = std::min(bh, bw) / 6;
  for (int r = 0; r < bh; ++r)
    for (int c = 0; c < bw; ++c) {
      const int dr = std::max({0, corner - r, r - (bh - 1 - corner)});
      const int dc = std::max({0, corner - c, c - (bw - 1 - corner)});
      if (dr * dr + dc * dc > corner * corner) continue;
      const auto base = static_cast<std::uint8_t>(uni(170, 215));
      img.set_pixel(mt + r, ml + c, {static_cast<std::uint8_t>(base - 10), base, static_cast<std::uint8_t>(base + 20)});
    }
  const int clutter = uni(4, 8);
  for (int k = 0; k < clutter; ++k) {
    const int h = uni(6, bh / 3), w = uni(6, bw / 3);
    const int top = mt + uni(0, bh - h), left = ml + uni(0, bw - w);
    const auto g = static_cast<std::uint8_t>(uni(60, 160));
    fill_rect(img, top, left, h, w, {static_cast<std::uint8_t>(g + 30), g, static_cast<std::uint8_t>(g / 2)});
  }
  for (int k = 0; k < 6; ++k) {
    const int r = uni(0, mt / 2), c = uni(0, width - 1);
    img.set_pixel(r, c, {90, 90, 90});
  }
  return img;
}

/// Dark object on a white background; shape depends on the class name.
inline RgbImage make_threat_scan(const std::string& kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RgbImage img(64, 64, 255);
  const Rgb metal{static_cast<std::uint8_t>(uni(20, 50)), static_cast<std::uint8_t>(uni(40, 70)),
                  static_cast<std::uint8_t>(uni(90, 130))};
  const Rgb darker{static_cast<std::uint8_t>(metal[0] / 2), static_cast<std::uint8_t>(metal[1] / 2),
                   static_cast<std::uint8_t>(metal[2] / 2)};
  if (kind == "Firearm") {
    const int len = uni(26, 34), barrel = uni(6, 8);
    fill_rect(img, 14, 12, barrel, len, metal);
    fill_rect(img, 14 + barrel, 12 + len - 12, uni(14, 18), 8, darker);
    fill_rect(img, 14 + barrel, 12 + len - 18, 4, 5, metal);
  } else if (kind == "Knives") {
    const int len = uni(28, 40);
    for (int c = 0; c < len; ++c) {
      const int h = std::max(2, 6 - c * 5 / len);
      fill_rect(img, 24, 10 + c, h, 1, metal);
    }
    fill_rect(img, 23, 10 + len, 8, uni(10, 14), darker);
  } else {
    const int h = uni(8, 14), w = uni(14, 22);
    fill_rect(img, 20, 20, h, w, metal);
    fill_rect(img, 20 + h / 3, 20 + w, h / 3 + 1, uni(4, 8), darker);
  }
  return img;
}

inline const std::vector<std::string>& classes() {
  static const std::vector<std::string> names{"Firearm", "FirearmParts", "Knives"};
  return names;
}

/// benign/NN.png and threats/<Class>/NN.png under `root`.
inline void write_corpus(const std::filesystem::path& root, int n_benign, int n_per_class, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "benign");
  for (int i = 0; i < n_benign; ++i) {
    const int w = 200 + 20 * (i % 3), h = 150 + 10 * (i % 2);
    save_image(make_bag(w, h, seed * 1000 + i), root / "benign" / ("bag" + std::to_string(i) + ".png"));
  }
  for (std::size_t k = 0; k < classes().size(); ++k) {
    const auto dir = root / "threats" / classes()[k];
    fs::create_directories(dir);
    for (int i = 0; i < n_per_class; ++i)
      save_image(make_threat_scan(classes()[k], seed * 7919 + k * 100 + i), dir / ("sig" + std::to_string(i) + ".png"));
  }
}

}  // namespace tipgen::fixtures
