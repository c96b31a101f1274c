// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"
#include "tipgen/tipgen.hpp"

namespace fs = std::filesystem;
using namespace tipgen;
using Clock = std::chrono::steady_clock;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %d  %-32s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every regular file under root, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& f : fs::recursive_directory_iterator(root))
    if (f.is_regular_file()) out[fs::relative(f.path(), root).string()] = slurp(f.path());
  return out;
}

GrayImage random_gray(std::mt19937_64& rng, int w, int h) {
  GrayImage g(w, h);
  for (auto& v : g.samples()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return g;
}

RgbImage random_rgb(std::mt19937_64& rng, int w, int h) {
  RgbImage img(w, h);
  for (auto& v : img.samples()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

big oracle_threshold(const big& g) {
  const big t = boost::multiprecision::exp(boost::multiprecision::pow(g, 5)) - big(0.5);
  return t < big(0.95) ? t : big(0.95);
}

void threshold_law() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const big g = big(i) / 10000;
    const double got = threat_threshold(static_cast<double>(g));
    worst = std::max(worst, std::abs(static_cast<double>(big(got) - oracle_threshold(big(static_cast<double>(g))))));
  }
  const double elapsed = seconds_since(t0);

  // Saturation point exp(g^5) - 0.5 = 0.95 solved in 50 digits.
  const big crossing = boost::multiprecision::pow(boost::multiprecision::log(big(1.45)), big(1) / 5);
  const double c = static_cast<double>(crossing);
  bool saturates = true;
  for (int i = 0; i <= 10000; ++i) {
    const double g = i / 10000.0;
    if (g >= c && threat_threshold(g) != 0.95) saturates = false;
    if (g < c - 1e-9 && threat_threshold(g) >= 0.95) saturates = false;
  }
  saturates = saturates && threat_threshold(std::nextafter(c, 2.0)) == 0.95 && threat_threshold(c - 1e-6) < 0.95;
  const bool ends = threat_threshold(0.0) == 0.5 && threat_threshold(1.0) == 0.95;
  report(1, "threat-threshold law", worst <= 1e-12 && saturates && ends && elapsed < 1.0,
         fmt("max |err| %.3g, min T %.2f, saturates at g >= %.10f, %.3f s", worst, threat_threshold(0.0), c,
             elapsed));
}

void insertion_intensity() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  int n = 0;
  while (n < 1000) {
    const BinaryMask m = oracle::random_mask(rng, 64, 0.05, 0.95);
    if (!m.any()) continue;
    const GrayImage g = random_gray(rng, m.width(), m.height());
    long long sum = 0, count = 0;
    for (int r = 0; r < m.height(); ++r)
      for (int c = 0; c < m.width(); ++c)
        if (m.test(r, c)) {
          sum += g.at(r, c, 0);
          ++count;
        }
    const big expected = big(sum) / (big(255) * count);
    worst = std::max(worst, std::abs(static_cast<double>(big(mean_insertion_intensity(g, m)) - expected)));
    ++n;
  }
  report(2, "insertion intensity exactness", worst <= 1e-12, fmt("%d masks, max |err| %.3g", n, worst));
}

void blend_exactness() {
  std::mt19937_64 rng(3);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const int t = static_cast<int>(rng() & 0xFF), s = static_cast<int>(rng() & 0xFF);
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (blend_channel(static_cast<std::uint8_t>(t), static_cast<std::uint8_t>(s), alpha) != oracle::blend(t, s, alpha))
      ++mismatches;
  }

  int fixtures_ok = 0, inside_mismatch = 0;
  for (int k = 0; k < 100; ++k) {
    const int w = 20 + static_cast<int>(rng() % 60), h = 20 + static_cast<int>(rng() % 60);
    const RgbImage target = random_rgb(rng, w, h);
    ThreatSignature sig;
    sig.image = random_rgb(rng, 1 + static_cast<int>(rng() % (w / 2)), 1 + static_cast<int>(rng() % (h / 2)));
    sig.image.set_pixel(0, 0, {0, 0, 0});  // at least one pixel always fires
    sig.foreground = BinaryMask(sig.image.width(), sig.image.height(), true);
    sig.label = "x";
    const Placement p{static_cast<int>(rng() % (h - sig.height() + 1)), static_cast<int>(rng() % (w - sig.width() + 1)),
                      sig.width(), sig.height()};
    const double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto rec = composite(target, sig, p, alpha);
    const Box b = p.box();
    bool outside_same = true;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (b.contains(r, c)) {
          const Rgb s = sig.image.pixel(r - p.row0, c - p.col0);
          const bool fires = luma(s) < rec.provenance.blend.threat_threshold * 255.0;
          for (int ch = 0; ch < 3; ++ch) {
            const auto want = fires ? oracle::blend(target.at(r, c, ch), s[ch], alpha) : target.at(r, c, ch);
            if (rec.image.at(r, c, ch) != want) ++inside_mismatch;
          }
        } else if (rec.image.pixel(r, c) != target.pixel(r, c)) {
          outside_same = false;
        }
      }
    fixtures_ok += outside_same;
  }
  report(3, "blend exactness", mismatches == 0 && fixtures_ok == 100 && inside_mismatch == 0,
         fmt("%d/10000 tuple mismatches, %d/100 fixtures untouched outside M, %d in-M mismatches", mismatches,
             fixtures_ok, inside_mismatch));
}

void morphology_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4);
  int bad = 0;
  for (int i = 0; i < 500; ++i) {
    const BinaryMask m = oracle::random_mask(rng, 32);
    const StructuringElement se{i % 2 ? KernelShape::Disc : KernelShape::Square, 1 + i % 3};
    if (dilate(m, se) != oracle::dilate(m, se)) ++bad;
    if (erode(m, se) != oracle::erode(m, se)) ++bad;
    if (fill_holes(m) != oracle::fill_holes(m)) ++bad;
    if (m.any()) {
      if (largest_region(m) != oracle::largest_region(m)) ++bad;
    } else {
      try {
        largest_region(m);
        ++bad;
      } catch (const Error& e) {
        bad += e.kind() != ErrorKind::EmptyMask;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  report(4, "morphology oracle equivalence", bad == 0 && elapsed < 30.0,
         fmt("500 masks x 4 operators, %d mismatches, %.2f s", bad, elapsed));
}

void placement_soundness() {
  std::vector<RgbImage> bags;
  std::vector<BinaryMask> regions;
  for (int i = 0; i < 8; ++i) {
    bags.push_back(fixtures::make_bag(200 + 20 * (i % 3), 150 + 10 * (i % 2), 500 + i));
    regions.push_back(segment_bag_region(bags.back(), SegmentationParams{}));
  }
  std::vector<ThreatSignature> sigs;
  for (std::size_t k = 0; k < fixtures::classes().size(); ++k)
    for (int i = 0; i < 3; ++i)
      sigs.push_back(extract_signature(fixtures::make_threat_scan(fixtures::classes()[k], 900 + 10 * k + i),
                                       fixtures::classes()[k]));

  const PipelineConfig cfg;
  int produced = 0, violations = 0, skipped = 0;
  for (int run = 0; run < 1000; ++run) {
    const auto& bag = bags[run % bags.size()];
    const auto& region = regions[run % bags.size()];
    const auto& sig = sigs[run % sigs.size()];
    CompositeRecord rec;
    try {
      rec = compose_one(bag, region, sig, derive_seed(77, run), cfg);
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    ++produced;
    const ThreatSignature rotated = rotate_signature(sig, rec.provenance.theta);
    const auto& p = rec.provenance.placement;
    const double t = rec.provenance.blend.threat_threshold;
    for (int i = 0; i < rotated.height(); ++i)
      for (int j = 0; j < rotated.width(); ++j) {
        if (!(luma(rotated.image.pixel(i, j)) < t * 255.0)) continue;
        const int r = p.row0 + i, c = p.col0 + j;
        if (!region.test(r, c) || !rec.bbox.contains(r, c)) ++violations;
      }
    for (int r = 0; r < bag.height(); ++r)
      for (int c = 0; c < bag.width(); ++c)
        if (rec.image.pixel(r, c) != bag.pixel(r, c) && (!region.test(r, c) || !rec.bbox.contains(r, c))) ++violations;
  }

  // An L-shaped signature can never sit on a one-pixel diagonal.
  ThreatSignature block;
  block.image = RgbImage(2, 2, 0);
  block.foreground = BinaryMask(2, 2, true);
  block.foreground.set(0, 1, false);
  block.image.set_pixel(0, 1, kWhite);
  BinaryMask diagonal(60, 60);
  for (int i = 0; i < 60; ++i) diagonal.set(i, i, true);
  bool impossible_raised = false;
  try {
    sample_placement(diagonal, block, 5, kDefaultMaxAttempts);
  } catch (const Error& e) {
    impossible_raised = e.kind() == ErrorKind::NoValidPlacement;
  }

  report(5, "placement soundness", violations == 0 && impossible_raised && produced >= 900,
         fmt("%d composites checked (%d seeds rejected upstream), %d violations, NoValidPlacement %s", produced,
             skipped, violations, impossible_raised ? "raised" : "NOT raised"));
}

struct BuildFixture {
  tipgen::testing::TempDir tmp{"tipgen-acceptance"};
  BuildConfig cfg;
  BuildResult result;
  double first_build_seconds = 0.0;
  std::string error;
};

void build_determinism(BuildFixture& fx) {
  fixtures::write_corpus(fx.tmp.path(), 20, 8, 2020);
  fx.cfg.benign_dir = fx.tmp.path() / "benign";
  fx.cfg.threat_dir = fx.tmp.path() / "threats";
  fx.cfg.out_dir = fx.tmp.path() / "out";
  fx.cfg.count_per_class = {{"Firearm", 100}, {"FirearmParts", 100}, {"Knives", 100}};
  fx.cfg.seed = 2020;
  const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  bool identical = false;
  std::size_t images = 0;
  try {
    const auto t0 = Clock::now();
    fx.result = build_dataset(fx.cfg, jobs);
    fx.first_build_seconds = seconds_since(t0);
    const auto first = snapshot(fx.cfg.out_dir);
    build_dataset(fx.cfg, jobs == 1 ? 1 : jobs - 1);
    identical = first == snapshot(fx.cfg.out_dir);
    for (const auto& [name, _] : first) images += name.starts_with("images/") && name.ends_with(".png");
  } catch (const std::exception& e) {
    fx.error = e.what();
  }
  const auto coco = fx.error.empty() ? read_coco(fx.cfg.out_dir / "annotations.json") : CocoDataset{};
  const bool ok = fx.error.empty() && images == 300 && coco.images.size() == 300 && coco.annotations.size() == 300 &&
                  identical && fx.first_build_seconds < 60.0;
  report(6, "build determinism and scale", ok,
         fx.error.empty() ? fmt("%zu images, %zu annotations, %.2f s on %u threads, rebuild %s", images,
                                coco.annotations.size(), fx.first_build_seconds, jobs,
                                identical ? "bit-identical" : "DIFFERS")
                          : "build failed: " + fx.error);
}

void split_protocol(const BuildFixture& fx) {
  if (!fx.error.empty()) return report(7, "split protocol", false, "no build");
  auto count = [](const DatasetManifest& m) {
    std::map<std::string, std::array<int, 3>> c;
    for (const auto& e : m.entries) ++c[e.category][static_cast<int>(e.split)];
    return c;
  };
  const auto resplit = stratified_split(fx.result.manifest, {0.6, 0.2, 0.2}, 99);
  bool ok = resplit.degenerate_classes.empty();
  std::string detail;
  for (const DatasetManifest* m : {&fx.result.manifest, &resplit.manifest})
    for (const auto& [cls, c] : count(*m)) {
      ok = ok && c == std::array<int, 3>{60, 20, 20};
      if (m == &fx.result.manifest) detail += fmt("%s %d/%d/%d  ", cls.c_str(), c[0], c[1], c[2]);
    }
  report(7, "split protocol", ok && count(fx.result.manifest).size() == 3, detail);
}

void evaluation_arithmetic(const BuildFixture& fx) {
  auto two_dp = [](double v) { return fmt("%.2f", v); };
  const std::string row1 = two_dp(mean_average_precision(std::vector<double>{0.91, 0.88, 0.85}));
  const std::string row2 = two_dp(mean_average_precision(std::vector<double>{0.87, 0.84, 0.76}));

  double perfect = -1.0;
  if (fx.error.empty()) {
    const auto gt = read_coco(fx.cfg.out_dir / "annotations.json");
    std::vector<DetectionRecord> dets;
    for (const auto& a : gt.annotations) dets.push_back({a.image_id, a.category_id, to_boxf(a.bbox), 0.5});
    perfect = evaluate(gt, dets).map;
  }

  const std::vector<GroundTruthBox> gts{{1, {0, 0, 10, 10}}, {1, {50, 50, 10, 10}}};
  const std::vector<ScoredBox> ranked{{1, {0, 0, 10, 10}, 0.9}, {1, {30, 30, 5, 5}, 0.8}, {1, {50, 50, 10, 10}, 0.7}};
  const double ap = average_precision(ranked, gts);
  const auto m = match_detections(ranked, gts, kDefaultIouThreshold);
  const double ap_oracle = oracle::ap_by_envelope_integration(m.true_positive, 2);

  const bool ok = row1 == "0.88" && row2 == "0.82" && perfect == 1.0 && std::abs(ap - 0.8333333333333333) <= 1e-9 &&
                  std::abs(ap - ap_oracle) <= 1e-9;
  report(8, "evaluation arithmetic", ok,
         fmt("mAP rows %s / %s, perfect-detection mAP %.4f, AP(TP,FP,TP) %.10f vs oracle %.10f", row1.c_str(),
             row2.c_str(), perfect, ap, ap_oracle));
}

void annotation_round_trip(const BuildFixture& fx) {
  if (!fx.error.empty()) return report(9, "annotation round-trip", false, "no build");
  tipgen::testing::TempDir tmp;
  const fs::path first = fx.cfg.out_dir / "annotations.json";
  write_coco(read_coco(first), tmp / "again.json");
  write_coco(read_coco(tmp / "again.json"), tmp / "third.json");
  const std::string a = slurp(first), b = slurp(tmp / "again.json"), c = slurp(tmp / "third.json");
  report(9, "annotation round-trip", a == b && b == c, fmt("%zu bytes, %s", a.size(), a == b && b == c ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  threshold_law();
  insertion_intensity();
  blend_exactness();
  morphology_equivalence();
  placement_soundness();
  BuildFixture fx;
  build_determinism(fx);
  split_protocol(fx);
  evaluation_arithmetic(fx);
  annotation_round_trip(fx);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
