#include "kvqa/knowledge.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <future>

#include "httplib.h"
#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<std::pair<Relation, std::string_view>, 11> kRelationNames{{
    {Relation::RelatedTo, "RelatedTo"},
    {Relation::AtLocation, "AtLocation"},
    {Relation::IsA, "IsA"},
    {Relation::CapableOf, "CapableOf"},
    {Relation::UsedFor, "UsedFor"},
    {Relation::Desires, "Desires"},
    {Relation::HasProperties, "HasProperties"},
    {Relation::HasA, "HasA"},
    {Relation::PartOf, "PartOf"},
    {Relation::ReceivesAction, "ReceivesAction"},
    {Relation::CreatedBy, "CreatedBy"},
}};

// Lowercase, underscores read as spaces, surrounding whitespace dropped.
std::string concept_key(std::string_view text) {
  std::string key = detail::to_lower(detail::trim(std::string(text)));
  std::replace(key.begin(), key.end(), '_', ' ');
  return key;
}

std::string percent_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '_' || c == '-' || c == '.') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xf];
    }
  }
  return out;
}

KnowledgeTriple triple_from_json(const json& entry, const std::string& origin, std::size_t index) {
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorKind::MalformedRecord, origin + " entry " + std::to_string(index) + ": " + msg);
  };
  if (!entry.is_object()) fail("not an object");
  KnowledgeTriple t;
  const json* head = detail::find_key(entry, "head");
  const json* rel = detail::find_key(entry, "relation");
  const json* tail = detail::find_key(entry, "tail");
  if (head == nullptr || !head->is_string()) fail("missing string 'head'");
  if (rel == nullptr || !rel->is_string()) fail("missing string 'relation'");
  if (tail == nullptr || !tail->is_string()) fail("missing string 'tail'");
  t.head = head->get<std::string>();
  t.tail = tail->get<std::string>();
  if (t.head.empty() || t.tail.empty()) fail("empty head or tail");
  auto relation = parse_relation(rel->get<std::string>());
  if (!relation) fail("relation '" + rel->get<std::string>() + "' is not in the vocabulary");
  t.relation = *relation;
  if (const json* s = detail::find_key(entry, "surface"); s != nullptr && !s->is_null()) {
    if (!s->is_string()) fail("'surface' must be a string");
    t.surface = s->get<std::string>();
  }
  if (const json* w = detail::find_key(entry, "weight"); w != nullptr && !w->is_null()) {
    if (!w->is_number()) fail("'weight' must be a number");
    t.weight = w->get<double>();
  }
  return t;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Eigen::VectorXd mean_embedding(const std::string& text, const EmbeddingTable& table) {
  const TokenSequence tokens = tokenize(text);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dim()));
  if (tokens.empty()) return acc;
  for (const auto& tok : tokens) acc += table.lookup(tok);
  return acc / static_cast<double>(tokens.size());
}

}  // namespace

std::string_view relation_name(Relation relation) {
  for (const auto& [rel, name] : kRelationNames) {
    if (rel == relation) return name;
  }
  return "RelatedTo";
}

std::optional<Relation> parse_relation(std::string_view text) {
  std::string key = detail::to_lower(detail::trim(std::string(text)));
  if (key.rfind("/r/", 0) == 0) key = key.substr(3);
  key.erase(std::remove_if(key.begin(), key.end(),
                           [](char c) { return c == ' ' || c == '_'; }),
            key.end());
  if (key == "hasproperty") return Relation::HasProperties;
  for (const auto& [rel, name] : kRelationNames) {
    if (detail::to_lower(std::string(name)) == key) return rel;
  }
  return std::nullopt;
}

std::string_view selection_mode_name(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::CoAttention: return "co_attention";
    case SelectionMode::ImageOnly: return "image_only";
    case SelectionMode::QuestionOnly: return "question_only";
  }
  return "co_attention";
}

SelectionMode parse_selection_mode(std::string_view text) {
  const std::string key = detail::to_lower(std::string(text));
  if (key == "co_attention" || key == "co-attention") return SelectionMode::CoAttention;
  if (key == "image_only" || key == "image-only") return SelectionMode::ImageOnly;
  if (key == "question_only" || key == "question-only") return SelectionMode::QuestionOnly;
  throw Error(ErrorKind::InvalidArgument, "unknown selection mode '" + std::string(text) + "'");
}

AttributeMatch match_question_attributes(const std::vector<std::string>& ranked_labels,
                                         const TokenSequence& question) {
  AttributeMatch out;
  for (const auto& label : ranked_labels) {
    const std::string lowered = detail::to_lower(label);
    const bool hit = std::find(question.begin(), question.end(), lowered) != question.end();
    (hit ? out.matched : out.unmatched).push_back(label);
  }
  return out;
}

std::vector<std::string> select_knowledge_targets(const std::vector<std::string>& ranked_labels,
                                                  const TokenSequence& question,
                                                  const SelectionConfig& cfg) {
  const std::size_t n = ranked_labels.size();
  std::vector<bool> matched(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string lowered = detail::to_lower(ranked_labels[i]);
    matched[i] = std::find(question.begin(), question.end(), lowered) != question.end();
  }

  // Decide per position so duplicate labels are budgeted like the loop would.
  std::vector<bool> keep(n, false);
  std::size_t granted = 0;
  switch (cfg.mode) {
    case SelectionMode::ImageOnly:
      for (std::size_t i = 0; i < std::min(n, cfg.unmatched_budget); ++i) keep[i] = true;
      break;
    case SelectionMode::QuestionOnly:
      keep = matched;
      break;
    case SelectionMode::CoAttention:
      for (std::size_t i = 0; i < n; ++i) {
        if (matched[i]) {
          keep[i] = true;
        } else if (granted < cfg.unmatched_budget) {
          keep[i] = true;
          ++granted;
        }
      }
      break;
  }

  std::vector<std::string> targets;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) targets.push_back(ranked_labels[i]);
  }
  return targets;
}

std::vector<std::string> select_knowledge_targets(const AttributeSet& attrs,
                                                  const TokenSequence& question,
                                                  const SelectionConfig& cfg) {
  return select_knowledge_targets(rank_attributes(attrs), question, cfg);
}

LocalKnowledgeStore::LocalKnowledgeStore(std::vector<KnowledgeTriple> triples)
    : triples_(std::move(triples)) {
  for (std::size_t i = 0; i < triples_.size(); ++i) {
    by_head_[concept_key(triples_[i].head)].push_back(i);
  }
}

LocalKnowledgeStore LocalKnowledgeStore::load(const std::filesystem::path& path) {
  return LocalKnowledgeStore(triples_from_json(detail::read_text(path), path.string()));
}

std::vector<KnowledgeTriple> LocalKnowledgeStore::edges(const std::string& label,
                                                        std::size_t max_edges) {
  std::vector<KnowledgeTriple> out;
  auto it = by_head_.find(concept_key(label));
  if (it == by_head_.end()) return out;
  for (std::size_t idx : it->second) {
    if (out.size() >= max_edges) break;
    out.push_back(triples_[idx]);
  }
  return out;
}

RemoteKnowledgeSource::RemoteKnowledgeSource(std::string base_url, double timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::vector<KnowledgeTriple> RemoteKnowledgeSource::edges(const std::string& label,
                                                          std::size_t max_edges) {
  std::vector<KnowledgeTriple> out;
  if (max_edges == 0) return out;

  std::string host = base_url_;
  std::string prefix;
  if (auto scheme = base_url_.find("://"); scheme != std::string::npos) {
    if (auto slash = base_url_.find('/', scheme + 3); slash != std::string::npos) {
      host = base_url_.substr(0, slash);
      prefix = base_url_.substr(slash);
    }
  }
  std::string concept_id = concept_key(label);
  std::replace(concept_id.begin(), concept_id.end(), ' ', '_');
  const std::string target =
      prefix + "/c/en/" + percent_encode(concept_id) + "?limit=" + std::to_string(max_edges);

  // One client per call keeps concurrent lookups independent.
  httplib::Client client(host);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  auto res = client.Get(target);
  if (!res) {
    throw Error(ErrorKind::NetworkFailure, "GET " + base_url_ + target + " failed: " +
                                               httplib::to_string(res.error()));
  }
  if (res->status == 404) return out;
  if (res->status != 200) {
    throw Error(ErrorKind::NetworkFailure,
                "GET " + base_url_ + target + " returned HTTP " + std::to_string(res->status));
  }
  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, "response for '" + label + "': " + e.what());
  }
  const json* edges = detail::find_key(doc, "edges");
  if (edges == nullptr || !edges->is_array()) return out;
  for (const json& e : *edges) {
    if (out.size() >= max_edges) break;
    auto text_of = [](const json* node) -> std::string {
      if (node == nullptr) return {};
      if (node->is_string()) return node->get<std::string>();
      const json* l = detail::find_key(*node, "label");
      if (l != nullptr && l->is_string()) return l->get<std::string>();
      const json* id = detail::find_key(*node, "@id");
      if (id != nullptr && id->is_string()) return id->get<std::string>();
      return {};
    };
    auto relation = parse_relation(text_of(detail::find_key(e, "rel")));
    if (!relation) continue;
    KnowledgeTriple t;
    t.head = text_of(detail::find_key(e, "start"));
    t.tail = text_of(detail::find_key(e, "end"));
    t.relation = *relation;
    if (t.head.empty() || t.tail.empty()) continue;
    if (const json* s = detail::find_key(e, "surfaceText"); s != nullptr && s->is_string()) {
      t.surface = s->get<std::string>();
    }
    if (const json* w = detail::find_key(e, "weight"); w != nullptr && w->is_number()) {
      t.weight = w->get<double>();
    }
    out.push_back(std::move(t));
  }
  return out;
}

CachedKnowledgeSource::CachedKnowledgeSource(std::filesystem::path cache_dir,
                                             std::unique_ptr<KnowledgeSource> upstream,
                                             std::unique_ptr<KnowledgeSource> fallback)
    : cache_dir_(std::move(cache_dir)), upstream_(std::move(upstream)), fallback_(std::move(fallback)) {}

std::filesystem::path CachedKnowledgeSource::entry_path(const std::string& label,
                                                        std::size_t max_edges) const {
  // Injective file name: [a-z0-9-] pass through, every other byte becomes _xx.
  std::string name;
  for (unsigned char c : concept_key(label)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-') {
      name += static_cast<char>(c);
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "_%02x", c);
      name += buf;
    }
  }
  return cache_dir_ / (name + "__" + std::to_string(max_edges) + ".json");
}

std::mutex& CachedKnowledgeSource::key_mutex(const std::string& key) {
  std::lock_guard lock(table_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::vector<KnowledgeTriple> CachedKnowledgeSource::edges(const std::string& label,
                                                          std::size_t max_edges) {
  const std::filesystem::path path = entry_path(label, max_edges);
  std::lock_guard lock(key_mutex(path.string()));
  if (std::filesystem::exists(path)) {
    {
      std::lock_guard counters(table_mutex_);
      ++hits_;
    }
    return triples_from_json(detail::read_text(path), path.string());
  }
  {
    std::lock_guard counters(table_mutex_);
    ++misses_;
  }
  std::vector<KnowledgeTriple> result;
  try {
    if (!upstream_) throw Error(ErrorKind::NetworkFailure, "no remote knowledge source configured");
    result = upstream_->edges(label, max_edges);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NetworkFailure || !fallback_) throw;
    return fallback_->edges(label, max_edges);
  }
  detail::write_text(path, triples_to_json(result));
  return result;
}

std::vector<KnowledgeTriple> fetch_edges(const std::string& label, std::size_t max_edges,
                                         KnowledgeSource& source) {
  std::vector<KnowledgeTriple> out = source.edges(label, max_edges);
  if (out.size() > max_edges) out.resize(max_edges);
  return out;
}

std::vector<KnowledgeTriple> extract_knowledge(const AttributeSet& attrs,
                                               const TokenSequence& question,
                                               const SelectionConfig& cfg,
                                               KnowledgeSource& source) {
  const std::vector<std::string> targets = select_knowledge_targets(attrs, question, cfg);
  std::vector<KnowledgeTriple> out;
  if (targets.empty()) return out;
  if (targets.size() == 1) return fetch_edges(targets.front(), cfg.max_edges_per_label, source);

  std::vector<std::future<std::vector<KnowledgeTriple>>> pending;
  pending.reserve(targets.size());
  for (const auto& label : targets) {
    pending.push_back(std::async(std::launch::async, [&source, label, &cfg] {
      return fetch_edges(label, cfg.max_edges_per_label, source);
    }));
  }
  // Wait for every lookup before rethrowing so no task outlives `source`.
  for (auto& f : pending) f.wait();
  for (auto& f : pending) {
    auto part = f.get();
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

Eigen::VectorXd vectorize_knowledge(std::span<const KnowledgeTriple> triples,
                                    const EmbeddingTable& table) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.dim()));
  if (triples.empty()) return acc;
  for (const auto& t : triples) {
    acc += (mean_embedding(t.head, table) +
            mean_embedding(detail::to_lower(std::string(relation_name(t.relation))), table) +
            mean_embedding(t.tail, table)) /
           3.0;
  }
  return acc / static_cast<double>(triples.size());
}

std::string knowledge_uri(const KnowledgeTriple& triple) {
  std::string key = triple.head;
  key += '\x1f';
  key += relation_name(triple.relation);
  key += '\x1f';
  key += triple.tail;
  const std::uint64_t hi = fnv1a(key, 0xcbf29ce484222325ULL);
  const std::uint64_t lo = fnv1a(key, 0x84222325cbf29ce4ULL);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return std::string("ConceptNet/e/") + buf;
}

KnowledgeRecord to_record(const KnowledgeTriple& triple, std::int64_t know_id) {
  KnowledgeRecord r;
  r.know_id = know_id;
  r.uri = knowledge_uri(triple);
  r.labels = {triple.head, triple.tail};
  r.surface = triple.surface.value_or("");
  r.relation = detail::to_lower(std::string(relation_name(triple.relation)));
  return r;
}

KnowledgeTriple from_record(const KnowledgeRecord& record) {
  if (record.labels.size() != 2) {
    throw Error(ErrorKind::MalformedRecord,
                "know_id " + std::to_string(record.know_id) + ": Labels must hold [head, tail]");
  }
  auto relation = parse_relation(record.relation);
  if (!relation) {
    throw Error(ErrorKind::MalformedRecord, "know_id " + std::to_string(record.know_id) +
                                                ": unknown relation '" + record.relation + "'");
  }
  KnowledgeTriple t;
  t.head = record.labels[0];
  t.tail = record.labels[1];
  t.relation = *relation;
  if (!record.surface.empty()) t.surface = record.surface;
  return t;
}

void export_knowledge_records(std::span<const KnowledgeTriple> triples,
                              std::span<const std::int64_t> ids, const std::filesystem::path& path) {
  if (triples.size() != ids.size()) {
    throw Error(ErrorKind::InvalidArgument, "export needs one know_id per triple");
  }
  ordered_json doc = ordered_json::array();
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const KnowledgeRecord r = to_record(triples[i], ids[i]);
    ordered_json entry;
    entry["know_id"] = r.know_id;
    entry["uri"] = r.uri;
    entry["Labels"] = r.labels;
    entry["Surface"] = r.surface;
    entry["Relation"] = r.relation;
    doc.push_back(std::move(entry));
  }
  detail::write_json(path, doc);
}

std::vector<KnowledgeRecord> import_knowledge_records(const std::filesystem::path& path) {
  const json doc = detail::read_json(path);
  if (!doc.is_array()) {
    throw Error(ErrorKind::MalformedRecord, path.string() + ": top level must be an array");
  }
  std::vector<KnowledgeRecord> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& e = doc[i];
    auto fail = [&](const std::string& msg) {
      throw Error(ErrorKind::MalformedRecord, path.string() + " entry " + std::to_string(i) + ": " + msg);
    };
    // Exact key names, as written by export_knowledge_records.
    if (!e.is_object()) fail("not an object");
    for (const char* key : {"know_id", "uri", "Labels", "Surface", "Relation"}) {
      if (!e.contains(key)) fail(std::string("missing key '") + key + "'");
    }
    if (!e["know_id"].is_number_integer() || !e["uri"].is_string() || !e["Labels"].is_array() ||
        !e["Surface"].is_string() || !e["Relation"].is_string()) {
      fail("field has the wrong type");
    }
    KnowledgeRecord r;
    r.know_id = e["know_id"].get<std::int64_t>();
    r.uri = e["uri"].get<std::string>();
    for (const json& l : e["Labels"]) {
      if (!l.is_string()) fail("Labels must be strings");
      r.labels.push_back(l.get<std::string>());
    }
    r.surface = e["Surface"].get<std::string>();
    r.relation = e["Relation"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string triples_to_json(std::span<const KnowledgeTriple> triples) {
  ordered_json doc = ordered_json::array();
  for (const auto& t : triples) {
    ordered_json entry;
    entry["head"] = t.head;
    entry["relation"] = relation_name(t.relation);
    entry["tail"] = t.tail;
    if (t.surface) entry["surface"] = *t.surface;
    if (t.weight) entry["weight"] = *t.weight;
    doc.push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

std::vector<KnowledgeTriple> triples_from_json(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, origin + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorKind::MalformedRecord, origin + ": top level must be an array");
  }
  std::vector<KnowledgeTriple> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(triple_from_json(doc[i], origin, i));
  return out;
}

}  // namespace kvqa
