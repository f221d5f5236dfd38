#include "kvqa/image_attributes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace {

using nlohmann::json;

std::string where(const std::filesystem::path& path, std::size_t image, std::size_t object) {
  return path.string() + " entry " + std::to_string(image) + " object " + std::to_string(object);
}

DetectedObject parse_object(const json& obj, const std::filesystem::path& path, std::size_t image,
                            std::size_t object, const AttributeLoadOptions& options) {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::MalformedRecord, where(path, image, object) + ": " + msg);
  };
  if (!obj.is_object()) fail("not an object");
  DetectedObject out;

  const json* label = detail::find_key(obj, "label");
  if (label == nullptr || !label->is_string()) fail("missing string 'label'");
  out.label = detail::to_lower(detail::trim(label->get<std::string>()));
  if (out.label.empty()) fail("empty label");

  const json* score = detail::find_key(obj, "score");
  if (score == nullptr || !score->is_number()) fail("missing numeric 'score'");
  out.score = score->get<double>();
  if (!(out.score >= 0.0 && out.score <= 1.0)) fail("score outside [0, 1]");

  const json* bbox = detail::find_key(obj, "bbox");
  if (bbox == nullptr || !bbox->is_array() || bbox->size() != 4) fail("'bbox' must hold 4 numbers");
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(*bbox)[i].is_number()) fail("'bbox' must hold 4 numbers");
    out.bbox[i] = (*bbox)[i].get<double>();
  }
  if (!(out.bbox[2] > 0.0 && out.bbox[3] > 0.0)) fail("bbox width and height must be positive");

  const json* feature = detail::find_key(obj, "feature");
  if (feature == nullptr || !feature->is_array()) fail("missing array 'feature'");
  out.feature.reserve(feature->size());
  for (const json& v : *feature) {
    if (!v.is_number()) fail("non-numeric feature value");
    out.feature.push_back(v.get<double>());
  }
  if (options.strict && out.feature.size() != options.feature_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                where(path, image, object) + ": feature length " +
                    std::to_string(out.feature.size()) + ", expected " +
                    std::to_string(options.feature_dim));
  }
  return out;
}

}  // namespace

std::vector<AttributeSet> load_attribute_file(const std::filesystem::path& path,
                                              const AttributeLoadOptions& options,
                                              std::vector<std::string>* warnings) {
  const json doc = detail::read_json(path);
  if (!doc.is_array()) {
    throw Error(ErrorKind::MalformedRecord, path.string() + ": top level must be an array");
  }
  std::vector<AttributeSet> sets;
  std::unordered_map<std::int64_t, std::size_t> slot;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& entry = doc[i];
    const json* id = detail::find_key(entry, "image_id");
    if (id == nullptr || !id->is_number_integer()) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + " entry " + std::to_string(i) + ": missing integer 'image_id'");
    }
    const json* objects = detail::find_key(entry, "objects");
    if (objects == nullptr || !objects->is_array() || objects->empty()) {
      throw Error(ErrorKind::MalformedRecord, path.string() + " entry " + std::to_string(i) +
                                                  ": 'objects' must be a non-empty array");
    }
    const auto image_id = id->get<std::int64_t>();
    auto [it, fresh] = slot.emplace(image_id, sets.size());
    if (fresh) sets.push_back(AttributeSet{image_id, {}});
    AttributeSet& set = sets[it->second];
    for (std::size_t k = 0; k < objects->size(); ++k) {
      set.objects.push_back(parse_object((*objects)[k], path, i, k, options));
    }
  }
  if (warnings != nullptr) {
    for (const auto& set : sets) {
      if (set.objects.size() < kMinObjectsPerImage || set.objects.size() > kMaxObjectsPerImage) {
        warnings->push_back("image " + std::to_string(set.image_id) + " has " +
                            std::to_string(set.objects.size()) +
                            " objects, outside the detector range [10, 100]");
      }
    }
  }
  return sets;
}

void save_attribute_file(const std::vector<AttributeSet>& sets, const std::filesystem::path& path) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& set : sets) {
    nlohmann::ordered_json objects = nlohmann::ordered_json::array();
    for (const auto& obj : set.objects) {
      nlohmann::ordered_json o;
      o["label"] = obj.label;
      o["score"] = obj.score;
      o["bbox"] = obj.bbox;
      o["feature"] = obj.feature;
      objects.push_back(std::move(o));
    }
    nlohmann::ordered_json entry;
    entry["image_id"] = set.image_id;
    entry["objects"] = std::move(objects);
    doc.push_back(std::move(entry));
  }
  detail::write_text(path, doc.dump() + "\n");
}

Eigen::VectorXd pool_features(const AttributeSet& attrs, PoolMode mode) {
  if (attrs.objects.empty()) {
    throw Error(ErrorKind::EmptyAttributeSet,
                "image " + std::to_string(attrs.image_id) + " has no objects");
  }
  const std::size_t dim = attrs.objects.front().feature.size();
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& obj : attrs.objects) {
    if (obj.feature.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "image " + std::to_string(attrs.image_id) + " mixes feature lengths");
    }
    pooled += Eigen::Map<const Eigen::VectorXd>(obj.feature.data(), static_cast<Eigen::Index>(dim));
  }
  if (mode == PoolMode::Mean) pooled /= static_cast<double>(attrs.objects.size());
  return pooled;
}

std::vector<std::string> rank_attributes(const AttributeSet& attrs) {
  std::map<std::string, double> best;
  for (const auto& obj : attrs.objects) {
    auto [it, fresh] = best.emplace(obj.label, obj.score);
    if (!fresh) it->second = std::max(it->second, obj.score);
  }
  std::vector<std::pair<std::string, double>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> labels;
  labels.reserve(ranked.size());
  for (auto& [label, score] : ranked) labels.push_back(label);
  return labels;
}

}  // namespace kvqa
