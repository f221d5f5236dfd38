#pragma once

// Question-aware knowledge selection.
//
// An image's attribute labels are walked in rank order. Labels that also
// occur among the question tokens always get a knowledge lookup; the rest
// share a small budget (5 by default) and stop once it is spent. Each selected
// label contributes up to max_edges_per_label edges from a knowledge source,
// and the collected triples are averaged into one word-vector.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "kvqa/image_attributes.hpp"
#include "kvqa/text_encoder.hpp"

namespace kvqa {

enum class Relation {
  RelatedTo,
  AtLocation,
  IsA,
  CapableOf,
  UsedFor,
  Desires,
  HasProperties,
  HasA,
  PartOf,
  ReceivesAction,
  CreatedBy,
};

std::string_view relation_name(Relation relation);
/// Accepts the canonical name in any case, "/r/Name" URIs, "part of" and
/// ConceptNet's singular "HasProperty".
std::optional<Relation> parse_relation(std::string_view text);

struct KnowledgeTriple {
  std::string head;
  Relation relation = Relation::RelatedTo;
  std::string tail;
  std::optional<std::string> surface;
  std::optional<double> weight;

  bool operator==(const KnowledgeTriple&) const = default;
};

/// On-disk export record. Keys are know_id, uri, Labels, Surface, Relation.
struct KnowledgeRecord {
  std::int64_t know_id = 0;
  std::string uri;
  std::vector<std::string> labels;  // [head, tail]
  std::string surface;
  std::string relation;  // lowercased relation name

  bool operator==(const KnowledgeRecord&) const = default;
};

enum class SelectionMode { CoAttention, ImageOnly, QuestionOnly };

std::string_view selection_mode_name(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view text);

struct SelectionConfig {
  std::size_t unmatched_budget = 5;
  /// Unmatched-label count used in the experiment preset.
  std::size_t extra_objects = 12;
  std::size_t max_edges_per_label = 11;
  SelectionMode mode = SelectionMode::CoAttention;

  static SelectionConfig experiment_preset() {
    SelectionConfig cfg;
    cfg.unmatched_budget = cfg.extra_objects;
    return cfg;
  }
};

struct KnowledgeSet {
  std::int64_t image_id = 0;
  std::int64_t question_id = 0;
  std::vector<KnowledgeTriple> triples;
  Eigen::VectorXd vector;
};

struct AttributeMatch {
  std::vector<std::string> matched;
  std::vector<std::string> unmatched;
};

/// Splits ranked labels by exact equality with any question token.
AttributeMatch match_question_attributes(const std::vector<std::string>& ranked_labels,
                                         const TokenSequence& question);

/// Labels that receive a knowledge lookup, in encounter order.
std::vector<std::string> select_knowledge_targets(const std::vector<std::string>& ranked_labels,
                                                  const TokenSequence& question,
                                                  const SelectionConfig& cfg);
std::vector<std::string> select_knowledge_targets(const AttributeSet& attrs,
                                                  const TokenSequence& question,
                                                  const SelectionConfig& cfg);

/// Anything that can list edges for a concept. Implementations must be safe to
/// call concurrently for distinct labels.
class KnowledgeSource {
 public:
  virtual ~KnowledgeSource() = default;
  /// At most max_edges triples in the source's stable order; empty for an
  /// unknown concept. Throws NetworkFailure when the backend is unreachable.
  virtual std::vector<KnowledgeTriple> edges(const std::string& label, std::size_t max_edges) = 0;
};

/// Offline store: a JSON array of {head, relation, tail, surface?, weight?}.
class LocalKnowledgeStore final : public KnowledgeSource {
 public:
  explicit LocalKnowledgeStore(std::vector<KnowledgeTriple> triples);
  static LocalKnowledgeStore load(const std::filesystem::path& path);

  std::vector<KnowledgeTriple> edges(const std::string& label, std::size_t max_edges) override;
  std::size_t size() const { return triples_.size(); }

 private:
  std::vector<KnowledgeTriple> triples_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_head_;
};

/// ConceptNet-style REST client: GET {base}/c/en/{concept}?limit={n}
/// returning {"edges": [{"start": {"label"}, "rel": {"label"}, "end": {"label"},
/// "surfaceText", "weight"}]}. Edges whose relation is outside the closed
/// vocabulary are skipped.
class RemoteKnowledgeSource final : public KnowledgeSource {
 public:
  explicit RemoteKnowledgeSource(std::string base_url, double timeout_seconds = 5.0);

  std::vector<KnowledgeTriple> edges(const std::string& label, std::size_t max_edges) override;

 private:
  std::string base_url_;
  double timeout_seconds_;
};

/// Disk cache in front of an upstream source, keyed by (label, max_edges).
/// On a cache miss with the upstream unreachable it uses the fallback source
/// when one is given, otherwise NetworkFailure propagates.
class CachedKnowledgeSource final : public KnowledgeSource {
 public:
  CachedKnowledgeSource(std::filesystem::path cache_dir, std::unique_ptr<KnowledgeSource> upstream,
                        std::unique_ptr<KnowledgeSource> fallback = nullptr);

  std::vector<KnowledgeTriple> edges(const std::string& label, std::size_t max_edges) override;

  std::filesystem::path entry_path(const std::string& label, std::size_t max_edges) const;
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::mutex& key_mutex(const std::string& key);

  std::filesystem::path cache_dir_;
  std::unique_ptr<KnowledgeSource> upstream_;
  std::unique_ptr<KnowledgeSource> fallback_;
  std::mutex table_mutex_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

std::vector<KnowledgeTriple> fetch_edges(const std::string& label, std::size_t max_edges,
                                         KnowledgeSource& source);

/// Edges for every selected label, concatenated in target order. Lookups for
/// distinct labels run concurrently; the merge order does not depend on
/// completion order.
std::vector<KnowledgeTriple> extract_knowledge(const AttributeSet& attrs,
                                               const TokenSequence& question,
                                               const SelectionConfig& cfg, KnowledgeSource& source);

/// Mean over triples of mean(head, relation, tail), where each part is the
/// mean embedding of its tokens and the relation is its lowercased name.
Eigen::VectorXd vectorize_knowledge(std::span<const KnowledgeTriple> triples,
                                    const EmbeddingTable& table);

/// Stable 128-bit digest rendered as "ConceptNet/e/<32 hex>".
std::string knowledge_uri(const KnowledgeTriple& triple);

KnowledgeRecord to_record(const KnowledgeTriple& triple, std::int64_t know_id);
/// Weight is not part of the export schema and comes back empty.
KnowledgeTriple from_record(const KnowledgeRecord& record);

/// One record per triple; ids[i] is the know_id of triples[i].
void export_knowledge_records(std::span<const KnowledgeTriple> triples,
                              std::span<const std::int64_t> ids, const std::filesystem::path& path);
std::vector<KnowledgeRecord> import_knowledge_records(const std::filesystem::path& path);

/// Canonical JSON used by the store and cache files.
std::string triples_to_json(std::span<const KnowledgeTriple> triples);
std::vector<KnowledgeTriple> triples_from_json(const std::string& text, const std::string& origin);

}  // namespace kvqa
