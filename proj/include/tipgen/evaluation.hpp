#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tipgen/coco.hpp"
#include "tipgen/error.hpp"

namespace tipgen {

inline constexpr double kDefaultIouThreshold = 0.5;

struct BoxF {
  double x = 0, y = 0, width = 0, height = 0;
};

inline BoxF to_boxf(const Box& b) { return {double(b.x), double(b.y), double(b.width), double(b.height)}; }

inline double iou(const BoxF& a, const BoxF& b) {
  const double ix = std::max(0.0, std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  return inter / (a.width * a.height + b.width * b.height - inter);
}

struct GroundTruthBox {
  int image_id = 0;
  BoxF bbox;
};

struct ScoredBox {
  int image_id = 0;
  BoxF bbox;
  double score = 0.0;
};

struct DetectionRecord {
  int image_id = 0;
  int category_id = 0;
  BoxF bbox;
  double score = 0.0;
};

struct MatchResult {
  std::vector<bool> true_positive;  // in descending-score order
  std::size_t num_gt = 0;
};

/// Greedy matching in descending score order (stable on input order). Each
/// detection takes the unmatched same-image GT with the highest IoU >= threshold.
inline MatchResult match_detections(std::span<const ScoredBox> dets, std::span<const GroundTruthBox> gts,
                                    double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::map<int, std::vector<std::size_t>> gt_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) gt_by_image[gts[g].image_id].push_back(g);
  std::vector<bool> used(gts.size(), false);

  MatchResult out{{}, gts.size()};
  out.true_positive.reserve(dets.size());
  for (auto d : order) {
    std::ptrdiff_t best = -1;
    double best_iou = -1.0;
    if (auto it = gt_by_image.find(dets[d].image_id); it != gt_by_image.end()) {
      for (auto g : it->second) {
        if (used[g]) continue;
        const double o = iou(dets[d].bbox, gts[g].bbox);
        if (o >= iou_threshold && o > best_iou) {
          best_iou = o;
          best = static_cast<std::ptrdiff_t>(g);
        }
      }
    }
    if (best >= 0) used[static_cast<std::size_t>(best)] = true;
    out.true_positive.push_back(best >= 0);
  }
  return out;
}

/// All-points interpolated AP from TP/FP flags in ranked order.
inline double average_precision_from_matches(const std::vector<bool>& tp, std::size_t num_gt) {
  if (num_gt == 0 || tp.empty()) return 0.0;
  const std::size_t n = tp.size();
  std::vector<double> recall(n), precision(n);
  std::size_t tps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tps += tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(tps) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
  }
  // precision envelope: max precision at any recall >= r
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

inline double average_precision(std::span<const ScoredBox> dets, std::span<const GroundTruthBox> gts,
                                double iou_threshold = kDefaultIouThreshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw Error(ErrorKind::Domain, "IoU threshold must lie in (0, 1]");
  const auto m = match_detections(dets, gts, iou_threshold);
  return average_precision_from_matches(m.true_positive, m.num_gt);
}

/// Unweighted mean; 0 for an empty list.
inline double mean_average_precision(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) return 0.0;
  return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) / static_cast<double>(per_class_ap.size());
}

struct ClassResult {
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

struct EvalReport {
  std::map<std::string, ClassResult> per_class;  // classes with at least one GT box
  double map = 0.0;
  double iou_threshold = kDefaultIouThreshold;
};

inline std::vector<DetectionRecord> detections_from_json(const nlohmann::json& doc, const std::string& name) {
  std::vector<DetectionRecord> out;
  try {
    if (!doc.is_array()) throw Error(ErrorKind::Schema, name + ": detections must be a JSON array");
    for (const auto& d : doc) {
      const auto& b = d.at("bbox");
      if (!b.is_array() || b.size() != 4) throw Error(ErrorKind::Schema, name + ": bbox must have 4 numbers");
      DetectionRecord r{d.at("image_id").get<int>(), d.at("category_id").get<int>(),
                        {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                        d.at("score").get<double>()};
      if (!(r.bbox.width > 0 && r.bbox.height > 0))
        throw Error(ErrorKind::Schema, name + ": detection with non-positive extent");
      out.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, name + ": " + e.what());
  }
  return out;
}

inline std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
  return detections_from_json(detail::parse_json(detail::read_text(path), path.string()), path.string());
}

inline EvalReport evaluate(const CocoDataset& gt, std::span<const DetectionRecord> dets,
                           double iou_threshold = kDefaultIouThreshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw Error(ErrorKind::Domain, "IoU threshold must lie in (0, 1]");
  const auto names = gt.category_names();
  std::map<int, std::vector<GroundTruthBox>> gt_by_cat;
  std::map<int, std::vector<ScoredBox>> det_by_cat;
  for (const auto& a : gt.annotations) gt_by_cat[a.category_id].push_back({a.image_id, to_boxf(a.bbox)});
  for (const auto& d : dets) {
    if (!names.contains(d.category_id))
      throw Error(ErrorKind::UnknownCategory, "detection category_id " + std::to_string(d.category_id) +
                                                  " is not a ground-truth category");
    det_by_cat[d.category_id].push_back({d.image_id, d.bbox, d.score});
  }

  EvalReport report;
  report.iou_threshold = iou_threshold;
  std::vector<double> aps;
  for (const auto& [cat, gts] : gt_by_cat) {
    const auto& cd = det_by_cat[cat];
    const auto m = match_detections(cd, gts, iou_threshold);
    ClassResult r;
    r.ap = average_precision_from_matches(m.true_positive, m.num_gt);
    r.num_gt = gts.size();
    r.true_positives = static_cast<std::size_t>(std::count(m.true_positive.begin(), m.true_positive.end(), true));
    r.false_positives = m.true_positive.size() - r.true_positives;
    report.per_class[names.at(cat)] = r;
    aps.push_back(r.ap);
  }
  report.map = mean_average_precision(aps);
  return report;
}

inline EvalReport evaluate(const std::filesystem::path& gt_path, const std::filesystem::path& det_path,
                           double iou_threshold = kDefaultIouThreshold) {
  const auto gt = read_coco(gt_path);
  const auto dets = read_detections(det_path);
  return evaluate(gt, dets, iou_threshold);
}

/// Two-decimal table.
inline std::string format_report(const EvalReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %8s %8s %8s %8s\n", "class", "AP", "GT", "TP", "FP");
  out += line;
  for (const auto& [name, c] : r.per_class) {
    std::snprintf(line, sizeof line, "%-20s %8.2f %8zu %8zu %8zu\n", name.c_str(), c.ap, c.num_gt, c.true_positives,
                  c.false_positives);
    out += line;
  }
  std::snprintf(line, sizeof line, "mAP@%.2f %.2f\n", r.iou_threshold, r.map);
  out += line;
  return out;
}

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json aps = nlohmann::json::object(), counts = nlohmann::json::object();
  for (const auto& [name, c] : r.per_class) {
    aps[name] = c.ap;
    counts[name] = {{"gt", c.num_gt}, {"tp", c.true_positives}, {"fp", c.false_positives}};
  }
  return {{"per_class_ap", aps}, {"counts", counts}, {"map", r.map}, {"iou_threshold", r.iou_threshold}};
}

}  // namespace tipgen
