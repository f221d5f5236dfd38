#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kvqa {

inline constexpr std::size_t kRegionFeatureDim = 2048;
inline constexpr std::size_t kMinObjectsPerImage = 10;
inline constexpr std::size_t kMaxObjectsPerImage = 100;

struct DetectedObject {
  std::string label;  // lowercased on load
  double score = 0.0;
  std::array<double, 4> bbox{};  // x, y, width, height in pixels
  std::vector<double> feature;

  bool operator==(const DetectedObject&) const = default;
};

struct AttributeSet {
  std::int64_t image_id = 0;
  std::vector<DetectedObject> objects;

  bool operator==(const AttributeSet&) const = default;
};

struct AttributeLoadOptions {
  /// Reject features whose length is not feature_dim.
  bool strict = true;
  std::size_t feature_dim = kRegionFeatureDim;
};

/// Groups objects by image_id in first-seen order. Images with fewer than 10
/// objects are accepted; a warning goes to the optional sink.
std::vector<AttributeSet> load_attribute_file(const std::filesystem::path& path,
                                              const AttributeLoadOptions& options = {},
                                              std::vector<std::string>* warnings = nullptr);
void save_attribute_file(const std::vector<AttributeSet>& sets, const std::filesystem::path& path);

enum class PoolMode { Sum, Mean };

/// Elementwise sum (or mean) of the object features.
Eigen::VectorXd pool_features(const AttributeSet& attrs, PoolMode mode = PoolMode::Sum);

/// Labels by descending score, ties lexicographic; each label appears once at
/// the rank of its best-scoring object.
std::vector<std::string> rank_attributes(const AttributeSet& attrs);

}  // namespace kvqa
