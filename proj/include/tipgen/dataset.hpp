#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tipgen/coco.hpp"
#include "tipgen/compositor.hpp"
#include "tipgen/error.hpp"
#include "tipgen/placement.hpp"
#include "tipgen/raster.hpp"
#include "tipgen/threat.hpp"

namespace tipgen {

enum class Split { Train, Val, Test };

constexpr std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::Schema, "unknown split '" + std::string(s) + "'");
}

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultSplitRatios{0.6, 0.2, 0.2};
inline constexpr int kDefaultRetryBudget = 10;

struct Annotation {
  int image_id = 0;
  std::string category;
  Box bbox;
  int annotation_id = 0;
  bool operator==(const Annotation&) const = default;
};

struct ManifestEntry {
  int image_id = 0;
  std::string file;  // relative to the dataset root
  int width = 0;
  int height = 0;
  std::string category;
  Box bbox;
  Split split = Split::Train;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;  // sorted
  nlohmann::json config = nlohmann::json::object();
  bool operator==(const DatasetManifest&) const = default;
};

struct BuildConfig {
  std::filesystem::path benign_dir;
  std::filesystem::path threat_dir;
  std::filesystem::path out_dir;
  std::map<std::string, int> count_per_class;
  PipelineConfig pipeline{};
  int background_threshold = kDefaultBackgroundThreshold;
  std::optional<std::uint64_t> seed;
  int retry_budget = kDefaultRetryBudget;
  SplitRatios split_ratios = kDefaultSplitRatios;
};

// ---------------------------------------------------------------------------
// Config document

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                                const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorKind::Config, "unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline nlohmann::json config_to_json(const BuildConfig& cfg) {
  const auto& seg = cfg.pipeline.segmentation;
  nlohmann::json j = {
      {"benign_dir", cfg.benign_dir.string()},
      {"threat_dir", cfg.threat_dir.string()},
      {"out_dir", cfg.out_dir.string()},
      {"count_per_class", cfg.count_per_class},
      {"alpha", cfg.pipeline.alpha},
      {"rotation", {{"min", cfg.pipeline.rotation_min}, {"max", cfg.pipeline.rotation_max}}},
      {"morphology",
       {{"threshold", seg.threshold},
        {"shape", seg.element.shape == KernelShape::Square ? "square" : "disc"},
        {"radius", seg.element.radius},
        {"dilate_iterations", seg.dilate_iterations},
        {"erode_iterations", seg.erode_iterations}}},
      {"background_threshold", cfg.background_threshold},
      {"max_attempts", cfg.pipeline.max_attempts},
      {"retry_budget", cfg.retry_budget},
      {"split_ratios", cfg.split_ratios},
  };
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

/// Strict parse: unknown keys and wrong types are ConfigErrors. Missing keys keep defaults.
inline BuildConfig config_from_json(const nlohmann::json& j) {
  BuildConfig cfg;
  try {
    detail::reject_unknown_keys(j,
                                {"benign_dir", "threat_dir", "out_dir", "count_per_class", "alpha", "rotation",
                                 "morphology", "background_threshold", "seed", "max_attempts", "retry_budget",
                                 "split_ratios"},
                                "config");
    if (j.contains("benign_dir")) cfg.benign_dir = j.at("benign_dir").get<std::string>();
    if (j.contains("threat_dir")) cfg.threat_dir = j.at("threat_dir").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("count_per_class")) cfg.count_per_class = j.at("count_per_class").get<std::map<std::string, int>>();
    if (j.contains("alpha")) cfg.pipeline.alpha = j.at("alpha").get<double>();
    if (j.contains("rotation")) {
      const auto& r = j.at("rotation");
      detail::reject_unknown_keys(r, {"min", "max"}, "rotation");
      if (r.contains("min")) cfg.pipeline.rotation_min = r.at("min").get<double>();
      if (r.contains("max")) cfg.pipeline.rotation_max = r.at("max").get<double>();
    }
    if (j.contains("morphology")) {
      const auto& m = j.at("morphology");
      detail::reject_unknown_keys(m, {"threshold", "shape", "radius", "dilate_iterations", "erode_iterations"},
                                  "morphology");
      auto& seg = cfg.pipeline.segmentation;
      if (m.contains("threshold")) seg.threshold = m.at("threshold").get<int>();
      if (m.contains("shape")) {
        const auto shape = m.at("shape").get<std::string>();
        if (shape == "square") seg.element.shape = KernelShape::Square;
        else if (shape == "disc") seg.element.shape = KernelShape::Disc;
        else throw Error(ErrorKind::Config, "morphology.shape must be 'square' or 'disc'");
      }
      if (m.contains("radius")) seg.element.radius = m.at("radius").get<int>();
      if (m.contains("dilate_iterations")) seg.dilate_iterations = m.at("dilate_iterations").get<int>();
      if (m.contains("erode_iterations")) seg.erode_iterations = m.at("erode_iterations").get<int>();
    }
    if (j.contains("background_threshold")) cfg.background_threshold = j.at("background_threshold").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_attempts")) cfg.pipeline.max_attempts = j.at("max_attempts").get<int>();
    if (j.contains("retry_budget")) cfg.retry_budget = j.at("retry_budget").get<int>();
    if (j.contains("split_ratios")) cfg.split_ratios = j.at("split_ratios").get<SplitRatios>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return cfg;
}

inline BuildConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  try {
    return config_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
}

inline void validate_ratios(const SplitRatios& ratios) {
  for (double r : ratios)
    if (!(r >= 0.0)) throw Error(ErrorKind::Config, "split ratios must be non-negative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw Error(ErrorKind::Config, "split ratios must sum to 1");
}

inline void validate_config(const BuildConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (!cfg.seed) fail("no seed given (config 'seed' or --seed)");
  if (cfg.out_dir.empty()) fail("out_dir is required");
  for (const auto& [name, n] : cfg.count_per_class) {
    if (n < 0) fail("count for class '" + name + "' is negative");
    if (name.empty()) fail("empty class name");
  }
  const auto& p = cfg.pipeline;
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (!(p.rotation_max >= p.rotation_min)) fail("rotation.max must be >= rotation.min");
  if (p.segmentation.element.radius < 1) fail("morphology.radius must be >= 1");
  if (p.segmentation.dilate_iterations < 0 || p.segmentation.erode_iterations < 0)
    fail("morphology iteration counts must be >= 0");
  if (p.max_attempts < 1) fail("max_attempts must be >= 1");
  if (cfg.retry_budget < 1) fail("retry_budget must be >= 1");
  validate_ratios(cfg.split_ratios);
}

// ---------------------------------------------------------------------------
// Stratified split

struct SplitResult {
  DatasetManifest manifest;
  std::vector<std::string> degenerate_classes;
};

/// Largest-remainder allocation of `n` items over `ratios`; ties go to the earlier split.
inline std::array<int, 3> allocate_counts(int n, const SplitRatios& ratios) {
  std::array<int, 3> counts{};
  std::array<double, 3> rem{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * n;
    counts[i] = static_cast<int>(std::floor(exact));
    rem[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (int k = 0; assigned < n; k = (k + 1) % 3) {
    if (ratios[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  while (assigned > n) {  // float overshoot guard
    for (int i = 2; i >= 0 && assigned > n; --i)
      if (counts[i] > 0) { --counts[i]; --assigned; }
  }
  return counts;
}

/// Per class: shuffle by seed, then allocate train/val/test by largest remainder.
inline SplitResult stratified_split(const DatasetManifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
  validate_ratios(ratios);
  SplitResult result{manifest, {}};
  const int positive = static_cast<int>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0; }));

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) by_class[manifest.entries[i].category].push_back(i);

  std::uint64_t class_index = 0;
  for (auto& [name, idx] : by_class) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return manifest.entries[a].image_id < manifest.entries[b].image_id; });
    const int n = static_cast<int>(idx.size());
    if (n < positive) {
      result.degenerate_classes.push_back(name);
      for (auto i : idx) result.manifest.entries[i].split = Split::Train;
      ++class_index;
      continue;
    }
    Rng rng(derive_seed(seed, class_index++));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto counts = allocate_counts(n, ratios);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (int k = 0; k < counts[s]; ++k) result.manifest.entries[idx[pos++]].split = static_cast<Split>(s);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Manifest and annotation documents

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"image_id", e.image_id},
                       {"file", e.file},
                       {"width", e.width},
                       {"height", e.height},
                       {"category", e.category},
                       {"bbox", {e.bbox.x, e.bbox.y, e.bbox.width, e.bbox.height}},
                       {"split", to_string(e.split)}});
  return {{"seed", m.seed}, {"classes", m.classes}, {"config", m.config}, {"entries", entries}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::string& name = "manifest") {
  DatasetManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.config = j.at("config");
    for (const auto& e : j.at("entries")) {
      const auto& b = e.at("bbox");
      if (!b.is_array() || b.size() != 4) throw Error(ErrorKind::Schema, name + ": bbox must have 4 numbers");
      m.entries.push_back({e.at("image_id").get<int>(), e.at("file").get<std::string>(), e.at("width").get<int>(),
                           e.at("height").get<int>(), e.at("category").get<std::string>(),
                           {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()},
                           parse_split(e.at("split").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, name + ": " + e.what());
  }
  std::set<int> ids;
  for (const auto& e : m.entries)
    if (!ids.insert(e.image_id).second)
      throw Error(ErrorKind::Schema, name + ": duplicate image_id " + std::to_string(e.image_id));
  return m;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  detail::write_text(path, detail::canonical_dump(to_json(m)));
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  return manifest_from_json(detail::parse_json(detail::read_text(path), path.string()), path.string());
}

inline std::vector<Annotation> annotations_of(const DatasetManifest& m) {
  std::vector<Annotation> out;
  for (const auto& e : m.entries) out.push_back({e.image_id, e.category, e.bbox, e.image_id});
  return out;
}

/// COCO view of a manifest. Categories cover the manifest's class list.
inline CocoDataset to_coco(const DatasetManifest& m, const std::vector<Annotation>& annotations) {
  CocoDataset ds;
  std::vector<std::string> names = m.classes;
  for (const auto& a : annotations) names.push_back(a.category);
  ds.categories = make_categories(names);
  std::map<std::string, int> ids;
  for (const auto& c : ds.categories) ids[c.name] = c.id;
  for (const auto& e : m.entries) ds.images.push_back({e.image_id, e.file, e.width, e.height});
  for (const auto& a : annotations) ds.annotations.push_back({a.annotation_id, a.image_id, ids.at(a.category), a.bbox});
  return ds;
}

inline void write_coco(const DatasetManifest& m, const std::vector<Annotation>& annotations,
                       const std::filesystem::path& path) {
  write_coco(to_coco(m, annotations), path);
}

// ---------------------------------------------------------------------------
// Build

struct BuildResult {
  DatasetManifest manifest;
  std::vector<Annotation> annotations;
  std::vector<std::string> report;  // one line per rejected (benign, signature) pair
  int retries = 0;
  std::vector<std::string> degenerate_classes;
};

namespace detail {

inline bool retryable(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyMask:
    case ErrorKind::EmptySignature:
    case ErrorKind::SignatureTooLarge:
    case ErrorKind::NoValidPlacement:
    case ErrorKind::DegenerateComposite:
    case ErrorKind::Decode:
      return true;
    default:
      return false;
  }
}

inline std::vector<std::filesystem::path> list_benign(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Config, "benign_dir not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (!f.is_regular_file()) continue;
    auto ext = f.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string image_name(int image_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%06d.png", image_id);
  return buf;
}

struct JobOutcome {
  ManifestEntry entry;
  std::vector<std::string> rejections;
};

}  // namespace detail

/// Generates every requested composite, writes `images/`, `annotations.json`,
/// `manifest.json` and `build_report.txt` under out_dir, and returns the result.
inline BuildResult build_dataset(const BuildConfig& cfg, unsigned jobs = 1) {
  namespace fs = std::filesystem;
  validate_config(cfg);
  const std::uint64_t seed = *cfg.seed;

  std::vector<std::string> classes;
  for (const auto& [name, _] : cfg.count_per_class) classes.push_back(name);

  // (class, index) in lexicographic class order; job k -> image_id k + 1.
  std::vector<std::string> job_class;
  for (const auto& [name, n] : cfg.count_per_class) job_class.insert(job_class.end(), static_cast<std::size_t>(n), name);

  std::vector<fs::path> benign;
  ThreatLibrary library;
  if (!job_class.empty()) {
    benign = detail::list_benign(cfg.benign_dir);
    if (benign.empty()) throw Error(ErrorKind::Config, "no PNG/JPEG images in " + cfg.benign_dir.string());
    try {
      library = load_threat_library(cfg.threat_dir, cfg.background_threshold);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::Config, e.what());
      throw;
    }
    for (const auto& [name, n] : cfg.count_per_class)
      if (n > 0 && (!library.contains(name) || library.at(name).empty()))
        throw Error(ErrorKind::Config, "threat library has no signatures for class '" + name + "'");
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir / "images", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (cfg.out_dir / "images").string() + ": " + ec.message());
  for (const auto& f : fs::directory_iterator(cfg.out_dir / "images"))
    if (f.is_regular_file() && f.path().extension() == ".png") fs::remove(f.path());

  std::vector<detail::JobOutcome> outcomes(job_class.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_job = [&](std::size_t k) {
    const auto& cls = job_class[k];
    const auto& sigs = library.at(cls);
    const std::uint64_t job_seed = derive_seed(seed, k);
    auto& out = outcomes[k];
    for (int attempt = 0; attempt < cfg.retry_budget; ++attempt) {
      const std::uint64_t attempt_seed = derive_seed(job_seed, static_cast<std::uint64_t>(attempt));
      Rng rng(attempt_seed);
      const auto bi = std::uniform_int_distribution<std::size_t>(0, benign.size() - 1)(rng);
      const auto si = std::uniform_int_distribution<std::size_t>(0, sigs.size() - 1)(rng);
      try {
        const RgbImage target = load_image(benign[bi]);
        const CompositeRecord rec =
            compose_one(target, sigs[si].signature, derive_seed(attempt_seed, 0xC0), cfg.pipeline);
        const int image_id = static_cast<int>(k) + 1;
        const std::string file = detail::image_name(image_id);
        save_image(rec.image, cfg.out_dir / file);
        out.entry = {image_id, file, rec.image.width(), rec.image.height(), cls, rec.bbox, Split::Train};
        return;
      } catch (const Error& e) {
        if (!detail::retryable(e.kind())) throw;
        out.rejections.push_back("job " + std::to_string(k) + " attempt " + std::to_string(attempt) + ": benign " +
                                 benign[bi].filename().string() + ", signature " + cls + "/" +
                                 sigs[si].path.filename().string() + ": " + e.what());
      }
    }
    throw Error(ErrorKind::ExhaustedRetries, "job " + std::to_string(k) + " (" + cls + ") failed " +
                                                 std::to_string(cfg.retry_budget) + " times; last: " +
                                                 out.rejections.back());
  };

  auto worker = [&] {
    for (std::size_t k; !failed && (k = next++) < job_class.size();) {
      try {
        run_job(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) first_error = std::current_exception();
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(job_class.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  BuildResult result;
  result.manifest.seed = seed;
  result.manifest.classes = classes;
  result.manifest.config = config_to_json(cfg);
  for (auto& o : outcomes) {
    result.manifest.entries.push_back(o.entry);
    result.retries += static_cast<int>(o.rejections.size());
    for (auto& line : o.rejections) result.report.push_back(std::move(line));
  }
  auto split = stratified_split(result.manifest, cfg.split_ratios, seed);
  result.manifest = std::move(split.manifest);
  result.degenerate_classes = std::move(split.degenerate_classes);
  result.annotations = annotations_of(result.manifest);

  write_coco(result.manifest, result.annotations, cfg.out_dir / "annotations.json");
  write_manifest(result.manifest, cfg.out_dir / "manifest.json");

  std::string report = "requested " + std::to_string(job_class.size()) + "\n";
  report += "composites " + std::to_string(result.manifest.entries.size()) + "\n";
  report += "retries " + std::to_string(result.retries) + "\n";
  for (const auto& c : result.degenerate_classes) report += "degenerate_class " + c + "\n";
  for (const auto& line : result.report) report += line + "\n";
  detail::write_text(cfg.out_dir / "build_report.txt", report);
  return result;
}

}  // namespace tipgen
