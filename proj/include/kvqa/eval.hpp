#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kvqa/ingest.hpp"

namespace kvqa {

/// Rooted concept tree. depth(root) = 1.
class Taxonomy {
 public:
  /// Throws MalformedRecord unless the edges form a single rooted tree.
  static Taxonomy from_edges(const std::vector<std::pair<std::string, std::string>>& child_parent);
  /// "child<TAB>parent" per line.
  static Taxonomy load(const std::filesystem::path& path);

  bool contains(const std::string& concept_name) const { return parent_.count(concept_name) != 0; }
  std::size_t size() const { return parent_.size(); }
  const std::string& root() const { return root_; }
  std::size_t depth(const std::string& concept_name) const;
  /// Lowest common ancestor of two nodes in the tree.
  std::string lca(const std::string& a, const std::string& b) const;

 private:
  std::string root_;
  std::unordered_map<std::string, std::string> parent_;  // root maps to ""
  std::unordered_map<std::string, std::size_t> depth_;
};

/// 2 depth(lca) / (depth(a) + depth(b)); 1 for identical strings, 0 when either
/// side is missing from the taxonomy.
double wup_similarity(const std::string& a, const std::string& b, const Taxonomy& taxonomy);

/// Best similarity against the ground truths, scaled by 0.1 below threshold.
double wups_score(const std::string& prediction, const std::vector<std::string>& ground_truths,
                  const Taxonomy& taxonomy, double threshold);

inline constexpr double kWupsDownWeight = 0.1;

struct EvalRow {
  std::int64_t question_id = 0;
  std::string prediction;
  std::vector<std::string> ground_truths;
  bool exact = false;
  std::vector<double> wups;  // one per threshold
};

struct EvalReport {
  std::string label;  // e.g. "co_attention/train"
  std::vector<double> thresholds;
  double exact_accuracy = 0.0;
  std::vector<double> wups_at_threshold;
  std::vector<EvalRow> rows;
};

/// Scores every annotation against predictions keyed by question_id.
/// Throws MissingPrediction when an annotated question has no prediction.
EvalReport evaluate(const std::unordered_map<std::int64_t, std::string>& predictions,
                    const std::vector<AnnotationRecord>& annotations, const Taxonomy& taxonomy,
                    const std::vector<double>& thresholds, std::string label = {});

/// Per-question CSV.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace kvqa
