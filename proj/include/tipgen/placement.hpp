#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "tipgen/error.hpp"
#include "tipgen/raster.hpp"
#include "tipgen/threat.hpp"

namespace tipgen {

/// All randomness in the toolkit comes from this generator, seeded per job.
using Rng = std::mt19937_64;

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Independent child seed for stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ull));
}

/// Top-left of the signature in the target frame. Target (i, j) maps to
/// source (i - row0, j - col0).
struct Placement {
  int row0 = 0;
  int col0 = 0;
  int sig_width = 0;
  int sig_height = 0;

  bool operator==(const Placement&) const = default;
  Box box() const noexcept { return {col0, row0, sig_width, sig_height}; }
};

inline constexpr int kDefaultMaxAttempts = 100;

/// True when every foreground bit of `sig` shifted by (row0, col0) lands on `region`.
inline bool placement_valid(const BinaryMask& region, const ThreatSignature& sig, int row0, int col0) {
  for (int r = 0; r < sig.height(); ++r)
    for (int c = 0; c < sig.width(); ++c)
      if (sig.foreground.test(r, c) && !region.test(row0 + r, col0 + c)) return false;
  return true;
}

/// Rejection sampling over in-bounds top-left positions; the first valid draw wins.
inline Placement sample_placement(const BinaryMask& region, const ThreatSignature& sig, std::uint64_t seed,
                                  int max_attempts = kDefaultMaxAttempts) {
  if (max_attempts < 1) throw Error(ErrorKind::Config, "max_attempts must be >= 1");
  if (sig.width() > region.width() || sig.height() > region.height())
    throw Error(ErrorKind::SignatureTooLarge,
                std::to_string(sig.width()) + "x" + std::to_string(sig.height()) + " signature exceeds " +
                    std::to_string(region.width()) + "x" + std::to_string(region.height()) + " target");
  Rng rng(seed);
  std::uniform_int_distribution<int> rows(0, region.height() - sig.height());
  std::uniform_int_distribution<int> cols(0, region.width() - sig.width());
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const int r = rows(rng);
    const int c = cols(rng);
    if (placement_valid(region, sig, r, c)) return {r, c, sig.width(), sig.height()};
  }
  throw Error(ErrorKind::NoValidPlacement, "no valid position after " + std::to_string(max_attempts) + " attempts");
}

/// The insertion matrix: ones on the signature rectangle.
inline BinaryMask insertion_mask(const Placement& p, int target_width, int target_height) {
  if (p.row0 < 0 || p.col0 < 0 || p.row0 + p.sig_height > target_height || p.col0 + p.sig_width > target_width)
    throw Error(ErrorKind::Domain, "placement out of bounds");
  BinaryMask m(target_width, target_height);
  for (int r = p.row0; r < p.row0 + p.sig_height; ++r)
    for (int c = p.col0; c < p.col0 + p.sig_width; ++c) m.set(r, c);
  return m;
}

}  // namespace tipgen
