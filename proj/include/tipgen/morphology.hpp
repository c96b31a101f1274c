#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <utility>
#include <vector>

#include "tipgen/error.hpp"
#include "tipgen/raster.hpp"

namespace tipgen {

enum class KernelShape { Square, Disc };

struct StructuringElement {
  KernelShape shape = KernelShape::Square;
  int radius = 2;

  /// Half-width of the kernel on row offset `dy` (|dy| <= radius).
  int half_width(int dy) const noexcept {
    if (shape == KernelShape::Square) return radius;
    return static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }

  bool contains(int dy, int dx) const noexcept {
    if (dy < -radius || dy > radius) return false;
    const int hw = half_width(dy);
    return dx >= -hw && dx <= hw;
  }
};

/// Parameters for the bag-region chain. Defaults are declared choices; the
/// threshold assumes near-white scanner background.
struct SegmentationParams {
  int threshold = 245;
  StructuringElement element{};
  int dilate_iterations = 3;
  int erode_iterations = 3;
};

/// Set iff intensity < threshold.
inline BinaryMask binarise(const GrayImage& gray, int threshold) {
  BinaryMask out(gray.width(), gray.height());
  auto src = gray.samples();
  auto dst = out.bits();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < threshold ? 1 : 0;
  return out;
}

namespace detail {

// Row prefix sums: prefix[r * (w + 1) + c] = set bits in row r, columns [0, c).
inline std::vector<int> row_prefix(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> prefix(static_cast<std::size_t>(h) * (w + 1), 0);
  for (int r = 0; r < h; ++r) {
    int* row = &prefix[static_cast<std::size_t>(r) * (w + 1)];
    for (int c = 0; c < w; ++c) row[c + 1] = row[c] + (mask.test(r, c) ? 1 : 0);
  }
  return prefix;
}

// Out-of-image cells count as background for both operations.
inline BinaryMask morph_pass(const BinaryMask& mask, const StructuringElement& se, bool dilation) {
  const int w = mask.width(), h = mask.height(), rad = se.radius;
  const auto prefix = row_prefix(mask);
  BinaryMask out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      bool hit = !dilation;
      for (int dy = -rad; dy <= rad; ++dy) {
        const int hw = se.half_width(dy);
        const int rr = r + dy;
        const int lo = c - hw, hi = c + hw;  // inclusive
        if (rr < 0 || rr >= h) {
          if (!dilation) { hit = false; break; }
          continue;
        }
        if (!dilation && (lo < 0 || hi >= w)) { hit = false; break; }
        const int* row = &prefix[static_cast<std::size_t>(rr) * (w + 1)];
        const int a = std::max(lo, 0), b = std::min(hi, w - 1);
        const int n = row[b + 1] - row[a];
        if (dilation && n > 0) { hit = true; break; }
        if (!dilation && n != b - a + 1) { hit = false; break; }
      }
      out.set(r, c, hit);
    }
  }
  return out;
}

}  // namespace detail

inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se, int iterations = 1) {
  if (se.radius < 1) throw Error(ErrorKind::Config, "structuring element radius must be >= 1");
  BinaryMask out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::morph_pass(out, se, true);
  return out;
}

inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& se, int iterations = 1) {
  if (se.radius < 1) throw Error(ErrorKind::Config, "structuring element radius must be >= 1");
  BinaryMask out = mask;
  for (int i = 0; i < iterations; ++i) out = detail::morph_pass(out, se, false);
  return out;
}

/// Sets every background cell that is not 4-connected to the image border.
inline BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  BinaryMask outside(w, h);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int r, int c) {
    if (!mask.test(r, c) && !outside.test(r, c)) {
      outside.set(r, c);
      stack.emplace_back(r, c);
    }
  };
  for (int c = 0; c < w; ++c) { seed(0, c); seed(h - 1, c); }
  for (int r = 0; r < h; ++r) { seed(r, 0); seed(r, w - 1); }
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    if (r > 0) seed(r - 1, c);
    if (r + 1 < h) seed(r + 1, c);
    if (c > 0) seed(r, c - 1);
    if (c + 1 < w) seed(r, c + 1);
  }
  return outside.complement();
}

/// 8-connected component of maximal size. Ties go to the component whose
/// first pixel comes earliest in row-major order.
inline BinaryMask largest_region(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  int next = 0, best = 0;
  std::size_t best_size = 0;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (!mask.test(r0, c0) || label[static_cast<std::size_t>(r0) * w + c0]) continue;
      const int id = ++next;
      std::size_t size = 0;
      label[static_cast<std::size_t>(r0) * w + c0] = id;
      stack.emplace_back(r0, c0);
      while (!stack.empty()) {
        auto [r, c] = stack.back();
        stack.pop_back();
        ++size;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
            auto& l = label[static_cast<std::size_t>(rr) * w + cc];
            if (l || !mask.test(rr, cc)) continue;
            l = id;
            stack.emplace_back(rr, cc);
          }
      }
      if (size > best_size) {
        best_size = size;
        best = id;
      }
    }
  }
  if (best == 0) throw Error(ErrorKind::EmptyMask, "mask has no set bits");
  BinaryMask out(w, h);
  auto bits = out.bits();
  for (std::size_t i = 0; i < label.size(); ++i) bits[i] = label[i] == best ? 1 : 0;
  return out;
}

/// Every intermediate of the bag-region chain, in order.
struct SegmentationStages {
  BinaryMask binary;
  BinaryMask dilated;
  BinaryMask filled;
  BinaryMask eroded;
  BinaryMask region;
};

inline SegmentationStages segment_bag_region_stages(const RgbImage& img, const SegmentationParams& params) {
  SegmentationStages s;
  s.binary = binarise(to_grayscale(img), params.threshold);
  s.dilated = dilate(s.binary, params.element, params.dilate_iterations);
  s.filled = fill_holes(s.dilated);
  s.eroded = erode(s.filled, params.element, params.erode_iterations);
  s.region = largest_region(s.eroded);
  return s;
}

/// binarise -> dilate -> fill_holes -> erode -> largest_region.
inline BinaryMask segment_bag_region(const RgbImage& img, const SegmentationParams& params) {
  return segment_bag_region_stages(img, params).region;
}

}  // namespace tipgen
