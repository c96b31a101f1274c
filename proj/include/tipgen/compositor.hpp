#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "tipgen/error.hpp"
#include "tipgen/morphology.hpp"
#include "tipgen/placement.hpp"
#include "tipgen/raster.hpp"
#include "tipgen/threat.hpp"

namespace tipgen {

inline constexpr double kDefaultAlpha = 0.9;
inline constexpr double kMinThreatThreshold = 0.5;
inline constexpr double kMaxThreatThreshold = 0.95;

struct BlendParams {
  double alpha = kDefaultAlpha;
  double g_hat = 0.0;
  double threat_threshold = kMinThreatThreshold;
};

struct Provenance {
  std::uint64_t seed = 0;
  double theta = 0.0;
  Placement placement{};
  BlendParams blend{};
};

struct CompositeRecord {
  RgbImage image;
  Box bbox;
  std::string label;
  Provenance provenance;
};

/// Normalised mean grey level under `m`: sum(G*M) / sum(255*M).
inline double mean_insertion_intensity(const GrayImage& gray, const BinaryMask& m) {
  if (gray.width() != m.width() || gray.height() != m.height())
    throw Error(ErrorKind::Domain, "grey image and insertion mask differ in size");
  std::uint64_t sum = 0, count = 0;
  auto g = gray.samples();
  auto bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) {
      sum += g[i];
      ++count;
    }
  if (count == 0) throw Error(ErrorKind::EmptyMask, "insertion mask is empty");
  return static_cast<double>(sum) / (255.0 * static_cast<double>(count));
}

/// T = min(exp(g^5) - 0.5, 0.95); always in [0.5, 0.95] for g in [0, 1].
inline double threat_threshold(double g_hat) {
  if (!(g_hat >= 0.0 && g_hat <= 1.0))
    throw Error(ErrorKind::Domain, "normalised intensity must lie in [0, 1], got " + std::to_string(g_hat));
  return std::min(std::exp(std::pow(g_hat, 5)) - 0.5, kMaxThreatThreshold);
}

/// (1 - alpha) * target + alpha * source, rounded half away from zero and clamped.
inline std::uint8_t blend_channel(std::uint8_t target, std::uint8_t source, double alpha) noexcept {
  const double v = std::round((1.0 - alpha) * target + alpha * source);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

/// Source pixels with luma >= T*255 are skipped.
inline bool blend_fires(std::uint8_t source_luma, double threat_threshold) noexcept {
  return source_luma < threat_threshold * 255.0;
}

/// Blends `sig` into `target` at `p`. bbox is tight over the pixels that were blended.
inline CompositeRecord composite(const RgbImage& target, const ThreatSignature& sig, const Placement& p,
                                 double alpha = kDefaultAlpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::Domain, "alpha must lie in [0, 1], got " + std::to_string(alpha));
  if (p.sig_width != sig.width() || p.sig_height != sig.height())
    throw Error(ErrorKind::Domain, "placement does not match signature size");
  const BinaryMask m = insertion_mask(p, target.width(), target.height());
  const double g_hat = mean_insertion_intensity(to_grayscale(target), m);
  const double t = threat_threshold(g_hat);

  CompositeRecord rec{target, {}, sig.label, {0, sig.theta, p, {alpha, g_hat, t}}};
  int top = target.height(), bottom = -1, left = target.width(), right = -1;
  for (int i = 0; i < sig.height(); ++i) {
    for (int j = 0; j < sig.width(); ++j) {
      const Rgb s = sig.image.pixel(i, j);
      if (!blend_fires(luma(s), t)) continue;
      const int r = p.row0 + i, c = p.col0 + j;
      for (int k = 0; k < 3; ++k) rec.image.at(r, c, k) = blend_channel(target.at(r, c, k), s[k], alpha);
      top = std::min(top, r);
      bottom = std::max(bottom, r);
      left = std::min(left, c);
      right = std::max(right, c);
    }
  }
  if (bottom < 0)
    throw Error(ErrorKind::DegenerateComposite,
                "no signature pixel is darker than T*255 = " + std::to_string(t * 255.0));
  rec.bbox = {left, top, right - left + 1, bottom - top + 1};
  return rec;
}

struct PipelineConfig {
  double alpha = kDefaultAlpha;
  double rotation_min = 0.0;
  double rotation_max = 360.0;
  SegmentationParams segmentation{};
  int max_attempts = kDefaultMaxAttempts;
};

/// Angle drawn uniformly from [rotation_min, rotation_max), wrapped to [0, 360).
inline double draw_rotation(std::uint64_t seed, const PipelineConfig& cfg) {
  double theta = cfg.rotation_min;
  if (cfg.rotation_max > cfg.rotation_min) {
    Rng rng(derive_seed(seed, 0));
    theta = std::uniform_real_distribution<double>(cfg.rotation_min, cfg.rotation_max)(rng);
  }
  theta = std::fmod(theta, 360.0);
  if (theta < 0) theta += 360.0;
  if (theta >= 360.0) theta = 0.0;
  return theta;
}

/// Rotate, segment the bag, place, blend. Deterministic in `seed`.
inline CompositeRecord compose_one(const RgbImage& target, const BinaryMask& region, const ThreatSignature& sig,
                                   std::uint64_t seed, const PipelineConfig& cfg) {
  const double theta = draw_rotation(seed, cfg);
  const ThreatSignature rotated = rotate_signature(sig, theta);
  const Placement p = sample_placement(region, rotated, derive_seed(seed, 1), cfg.max_attempts);
  CompositeRecord rec = composite(target, rotated, p, cfg.alpha);
  rec.provenance.seed = seed;
  rec.provenance.theta = theta;
  return rec;
}

inline CompositeRecord compose_one(const RgbImage& target, const ThreatSignature& sig, std::uint64_t seed,
                                   const PipelineConfig& cfg) {
  return compose_one(target, segment_bag_region(target, cfg.segmentation), sig, seed, cfg);
}

inline nlohmann::json provenance_json(const CompositeRecord& rec) {
  const auto& pv = rec.provenance;
  return {
      {"label", rec.label},
      {"seed", pv.seed},
      {"theta", pv.theta},
      {"placement", {{"row0", pv.placement.row0}, {"col0", pv.placement.col0},
                     {"width", pv.placement.sig_width}, {"height", pv.placement.sig_height}}},
      {"bbox", {rec.bbox.x, rec.bbox.y, rec.bbox.width, rec.bbox.height}},
      {"alpha", pv.blend.alpha},
      {"g_hat", pv.blend.g_hat},
      {"threat_threshold", pv.blend.threat_threshold},
  };
}

}  // namespace tipgen
