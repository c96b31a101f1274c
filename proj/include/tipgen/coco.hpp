#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tipgen/error.hpp"
#include "tipgen/raster.hpp"

namespace tipgen {

struct CocoImage {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  bool operator==(const CocoImage&) const = default;
};

struct CocoAnnotation {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  Box bbox;
  bool operator==(const CocoAnnotation&) const = default;
};

struct CocoCategory {
  int id = 0;
  std::string name;
  bool operator==(const CocoCategory&) const = default;
};

/// COCO detection ground truth restricted to the fields this toolkit uses.
struct CocoDataset {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;

  bool operator==(const CocoDataset&) const = default;

  std::map<int, std::string> category_names() const {
    std::map<int, std::string> out;
    for (const auto& c : categories) out[c.id] = c.name;
    return out;
  }
};

/// Category ids follow lexicographic order of the names, starting at 1.
inline std::vector<CocoCategory> make_categories(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<CocoCategory> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back({static_cast<int>(i + 1), names[i]});
  return out;
}

namespace detail {

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline nlohmann::json parse_json(const std::string& text, const std::string& name) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, name + ": " + e.what());
  }
}

/// Keys sorted (nlohmann default map), two-space indent, trailing newline.
inline std::string canonical_dump(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace detail

inline nlohmann::json to_json(const CocoDataset& ds) {
  nlohmann::json images = nlohmann::json::array(), anns = nlohmann::json::array(), cats = nlohmann::json::array();
  for (const auto& im : ds.images)
    images.push_back({{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
  for (const auto& a : ds.annotations)
    anns.push_back({{"id", a.id},
                    {"image_id", a.image_id},
                    {"category_id", a.category_id},
                    {"bbox", {a.bbox.x, a.bbox.y, a.bbox.width, a.bbox.height}},
                    {"area", a.bbox.area()},
                    {"iscrowd", 0}});
  for (const auto& c : ds.categories) cats.push_back({{"id", c.id}, {"name", c.name}});
  return {{"images", images}, {"annotations", anns}, {"categories", cats}};
}

inline CocoDataset coco_from_json(const nlohmann::json& doc, const std::string& name = "COCO document") {
  CocoDataset ds;
  try {
    for (const auto& im : doc.at("images"))
      ds.images.push_back({im.at("id").get<int>(), im.at("file_name").get<std::string>(),
                           im.at("width").get<int>(), im.at("height").get<int>()});
    for (const auto& c : doc.at("categories")) ds.categories.push_back({c.at("id").get<int>(), c.at("name").get<std::string>()});
    for (const auto& a : doc.at("annotations")) {
      const auto& b = a.at("bbox");
      if (!b.is_array() || b.size() != 4) throw Error(ErrorKind::Schema, name + ": bbox must have 4 numbers");
      ds.annotations.push_back({a.at("id").get<int>(), a.at("image_id").get<int>(), a.at("category_id").get<int>(),
                                {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, name + ": " + e.what());
  }
  const auto names = ds.category_names();
  for (const auto& a : ds.annotations) {
    if (!names.contains(a.category_id))
      throw Error(ErrorKind::Schema, name + ": annotation " + std::to_string(a.id) + " references unknown category");
    if (a.bbox.width <= 0 || a.bbox.height <= 0)
      throw Error(ErrorKind::Schema, name + ": annotation " + std::to_string(a.id) + " has a non-positive extent");
  }
  return ds;
}

inline void write_coco(const CocoDataset& ds, const std::filesystem::path& path) {
  detail::write_text(path, detail::canonical_dump(to_json(ds)));
}

inline CocoDataset read_coco(const std::filesystem::path& path) {
  return coco_from_json(detail::parse_json(detail::read_text(path), path.string()), path.string());
}

}  // namespace tipgen
