// tipgen: threat image projection dataset toolkit.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tipgen/tipgen.hpp"

namespace fs = std::filesystem;
using namespace tipgen;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r{};
  std::stringstream ss(text);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) throw Error(ErrorKind::Config, "expected three comma-separated ratios");
    try {
      r[i++] = std::stod(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "bad ratio '" + item + "'");
    }
  }
  if (i != 3) throw Error(ErrorKind::Config, "expected three comma-separated ratios");
  return r;
}

int cmd_extract(const std::vector<std::string>& inputs, const std::string& label, const fs::path& out,
                int threshold) {
  const fs::path dir = out / label;
  fs::create_directories(dir);
  for (const auto& in : inputs) {
    try {
      const auto sig = extract_signature(load_image(in), label, threshold);
      const fs::path dest = dir / (fs::path(in).stem().string() + ".png");
      save_image(sig.image, dest);
      std::cout << dest.string() << "\n";
    } catch (const Error& e) {
      throw e.with_context(in);
    }
  }
  return 0;
}

void dump_stages(const RgbImage& bag, const SegmentationParams& params, const fs::path& dir) {
  fs::create_directories(dir);
  const BinaryMask binary = binarise(to_grayscale(bag), params.threshold);
  save_image(binary, dir / "b_binary.png");
  const BinaryMask dilated = dilate(binary, params.element, params.dilate_iterations);
  save_image(dilated, dir / "c_dilated.png");
  const BinaryMask filled = fill_holes(dilated);
  save_image(filled, dir / "d_filled.png");
  const BinaryMask eroded = erode(filled, params.element, params.erode_iterations);
  save_image(eroded, dir / "e_eroded.png");
  if (eroded.any()) save_image(largest_region(eroded), dir / "f_region.png");
}

struct ComposeArgs {
  std::string bag, threat, label, out, sidecar, config, debug_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
};

int cmd_compose(const ComposeArgs& a) {
  BuildConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  if (a.seed) cfg.seed = a.seed;
  if (!cfg.seed) throw Error(ErrorKind::Config, "no seed given (--seed or config 'seed')");
  if (a.alpha) cfg.pipeline.alpha = *a.alpha;
  if (!(cfg.pipeline.alpha >= 0.0 && cfg.pipeline.alpha <= 1.0)) throw Error(ErrorKind::Config, "alpha must lie in [0, 1]");

  const std::string label = a.label.empty() ? fs::path(a.threat).parent_path().filename().string() : a.label;
  RgbImage bag;
  ThreatSignature sig;
  try {
    bag = load_image(a.bag);
  } catch (const Error& e) {
    throw e.with_context(a.bag);
  }
  try {
    sig = extract_signature(load_image(a.threat), label, cfg.background_threshold);
  } catch (const Error& e) {
    throw e.with_context(a.threat);
  }
  if (!a.debug_dir.empty()) dump_stages(bag, cfg.pipeline.segmentation, a.debug_dir);

  CompositeRecord rec;
  try {
    rec = compose_one(bag, sig, *cfg.seed, cfg.pipeline);
  } catch (const Error& e) {
    throw e.with_context("bag " + a.bag + ", threat " + a.threat);
  }
  save_image(rec.image, a.out);
  if (!a.sidecar.empty()) detail::write_text(a.sidecar, provenance_json(rec).dump(2) + "\n");
  std::cout << provenance_json(rec).dump() << "\n";
  return 0;
}

int cmd_build(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
              unsigned jobs) {
  BuildConfig cfg = load_config(config_path);
  if (seed) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const auto result = build_dataset(cfg, jobs);
  for (const auto& c : result.degenerate_classes)
    std::cerr << "warning: DegenerateClass '" << c << "' has too few images to split; placed in train\n";
  if (result.retries > 0)
    std::cerr << result.retries << " rejected pairs resampled; see " << (cfg.out_dir / "build_report.txt").string()
              << "\n";
  std::cout << "wrote " << result.manifest.entries.size() << " composites to " << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_split(const std::string& manifest_path, const std::string& ratios, std::optional<std::uint64_t> seed,
              const std::string& out) {
  const auto r = parse_ratios(ratios);
  const auto manifest = read_manifest(manifest_path);
  const auto result = stratified_split(manifest, r, seed.value_or(manifest.seed));
  for (const auto& c : result.degenerate_classes)
    std::cerr << "warning: DegenerateClass '" << c << "' has too few images to split; placed in train\n";
  write_manifest(result.manifest, out.empty() ? manifest_path : out);
  return 0;
}

int cmd_eval(const std::string& gt, const std::string& det, double iou_thr, const std::string& json_out) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) throw Error(ErrorKind::Config, "--iou must lie in (0, 1]");
  const auto report = evaluate(gt, det, iou_thr);
  std::cout << format_report(report);
  if (!json_out.empty()) detail::write_text(json_out, report_json(report).dump(2) + "\n");
  return 0;
}

int cmd_inspect(const std::string& manifest_path) {
  const auto m = read_manifest(manifest_path);
  std::map<std::string, std::map<std::string, int>> table;
  std::map<std::string, int> totals;
  for (const auto& c : m.classes) table[c];
  for (const auto& e : m.entries) {
    ++table[e.category][std::string(to_string(e.split))];
    ++totals[std::string(to_string(e.split))];
  }
  std::printf("%-20s %8s %8s %8s %8s\n", "class", "total", "train", "val", "test");
  for (const auto& [name, splits] : table) {
    int total = 0;
    for (const auto& [_, n] : splits) total += n;
    auto get = [&](const char* s) { auto it = splits.find(s); return it == splits.end() ? 0 : it->second; };
    std::printf("%-20s %8d %8d %8d %8d\n", name.c_str(), total, get("train"), get("val"), get("test"));
  }
  std::printf("%-20s %8zu %8d %8d %8d\n", "all", m.entries.size(), totals["train"], totals["val"], totals["test"]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threat image projection: synthesise annotated X-ray baggage datasets and score detections"};
  app.require_subcommand(1);

  auto* extract = app.add_subcommand("extract", "Build a threat library from plain-background scans");
  std::vector<std::string> ex_inputs;
  std::string ex_label, ex_out;
  int ex_threshold = kDefaultBackgroundThreshold;
  extract->add_option("inputs", ex_inputs, "Raw threat scans")->required()->check(CLI::ExistingFile);
  extract->add_option("--label", ex_label, "Class name")->required();
  extract->add_option("--out", ex_out, "Library root; signatures go to <out>/<label>/")->required();
  extract->add_option("--threshold", ex_threshold, "Background threshold (grey < threshold is object)")
      ->check(CLI::Range(0, 256));

  auto* compose = app.add_subcommand("compose", "Project one threat into one bag image");
  ComposeArgs ca;
  compose->add_option("--bag", ca.bag, "Benign bag image")->required();
  compose->add_option("--threat", ca.threat, "Threat scan or signature PNG")->required();
  compose->add_option("--label", ca.label, "Class name (default: threat file's directory name)");
  compose->add_option("--out", ca.out, "Output PNG")->required();
  compose->add_option("--sidecar", ca.sidecar, "Write provenance JSON here");
  compose->add_option("--config", ca.config, "Config document for pipeline parameters");
  compose->add_option("--seed", ca.seed, "RNG seed (required unless the config has one)");
  compose->add_option("--alpha", ca.alpha, "Blend transparency");
  compose->add_option("--debug-stages", ca.debug_dir, "Dump each segmentation stage as PNG into this directory");

  auto* build = app.add_subcommand("build", "Generate a dataset from a config document");
  std::string b_config, b_out;
  std::optional<std::uint64_t> b_seed;
  unsigned b_jobs = std::max(1u, std::thread::hardware_concurrency());
  build->add_option("--config", b_config, "Config document (JSON)")->required();
  build->add_option("--seed", b_seed, "Overrides the config seed");
  build->add_option("--out", b_out, "Overrides out_dir");
  build->add_option("--jobs", b_jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* split = app.add_subcommand("split", "Stratified train/val/test split of a manifest");
  std::string s_manifest, s_ratios = "0.6,0.2,0.2", s_out;
  std::optional<std::uint64_t> s_seed;
  split->add_option("--manifest", s_manifest, "manifest.json")->required();
  split->add_option("--ratios", s_ratios, "train,val,test");
  split->add_option("--seed", s_seed, "Shuffle seed (default: the manifest's build seed)");
  split->add_option("--out", s_out, "Output manifest (default: overwrite input)");

  auto* eval = app.add_subcommand("eval", "Per-class AP and mAP of detections against COCO ground truth");
  std::string e_gt, e_det, e_json;
  double e_iou = kDefaultIouThreshold;
  eval->add_option("--gt", e_gt, "COCO ground truth")->required();
  eval->add_option("--det", e_det, "COCO detection results")->required();
  eval->add_option("--iou", e_iou, "IoU threshold");
  eval->add_option("--json", e_json, "Also write the report as JSON");

  auto* inspect = app.add_subcommand("inspect", "Per-class and per-split counts of a manifest");
  std::string i_manifest;
  inspect->add_option("--manifest", i_manifest, "manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*extract) return cmd_extract(ex_inputs, ex_label, ex_out, ex_threshold);
    if (*compose) return cmd_compose(ca);
    if (*build) return cmd_build(b_config, b_seed, b_out, b_jobs);
    if (*split) return cmd_split(s_manifest, s_ratios, s_seed, s_out);
    if (*eval) return cmd_eval(e_gt, e_det, e_iou, e_json);
    if (*inspect) return cmd_inspect(i_manifest);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Config ? kExitUsage : kExitDomain;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
