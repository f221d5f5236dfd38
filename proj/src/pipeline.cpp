#include "kvqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

fs::path RunConfig::knowledge_dir() const {
  return paths.knowledge_dir.empty() ? paths.work_dir : paths.knowledge_dir;
}
fs::path RunConfig::cache_dir() const {
  return paths.cache_dir.empty() ? paths.work_dir / "knowledge_cache" : paths.cache_dir;
}
fs::path RunConfig::checkpoint() const {
  return paths.checkpoint.empty() ? paths.work_dir / "model.ckpt" : paths.checkpoint;
}
fs::path RunConfig::metrics() const {
  return paths.metrics.empty() ? paths.work_dir / "metrics.csv" : paths.metrics;
}
fs::path RunConfig::report_dir() const {
  return paths.report_dir.empty() ? paths.work_dir / "reports" : paths.report_dir;
}

ModelConfig RunConfig::model_config(std::size_t classes) const {
  ModelConfig m;
  m.image_dim = image_dim;
  m.knowledge_dim = embedding_dim;
  m.embed_dim = embedding_dim;
  m.question_dim = lstm_hidden;
  m.hidden.assign(mlp_layers, mlp_hidden);
  m.classes = classes;
  m.dropout = dropout;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.seed = seed;
  t.freeze_encoder = freeze_encoder;
  return t;
}

namespace {

const char* pool_name(PoolMode m) { return m == PoolMode::Mean ? "mean" : "sum"; }

PoolMode parse_pool(const std::string& s) {
  const auto v = detail::to_lower(s);
  if (v == "sum") return PoolMode::Sum;
  if (v == "mean") return PoolMode::Mean;
  throw Error(ErrorKind::InvalidArgument, "unknown pooling '" + s + "' (expected sum or mean)");
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("config field '") + key + "': " + e.what());
  }
}

void read_path(const json& obj, const char* key, fs::path& out, const fs::path& base) {
  std::string s;
  read_field(obj, key, s);
  if (s.empty()) return;
  fs::path p(s);
  out = (p.is_relative() && !base.empty()) ? base / p : p;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedRecord, "config must be a JSON object");

  RunConfig c;
  if (auto it = doc.find("paths"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorKind::MalformedRecord, "config 'paths' must be an object");
    const auto& p = *it;
    read_path(p, "questions", c.paths.questions, base_dir);
    read_path(p, "annotations", c.paths.annotations, base_dir);
    read_path(p, "attributes", c.paths.attributes, base_dir);
    read_path(p, "embeddings", c.paths.embeddings, base_dir);
    read_path(p, "taxonomy", c.paths.taxonomy, base_dir);
    read_path(p, "knowledge_store", c.paths.knowledge_store, base_dir);
    read_path(p, "cache_dir", c.paths.cache_dir, base_dir);
    read_path(p, "work_dir", c.paths.work_dir, base_dir);
    read_path(p, "knowledge_dir", c.paths.knowledge_dir, base_dir);
    read_path(p, "checkpoint", c.paths.checkpoint, base_dir);
    read_path(p, "metrics", c.paths.metrics, base_dir);
    read_path(p, "report_dir", c.paths.report_dir, base_dir);
  }
  if (auto it = doc.find("selection"); it != doc.end()) {
    const auto& s = *it;
    read_field(s, "unmatched_budget", c.selection.unmatched_budget);
    read_field(s, "extra_objects", c.selection.extra_objects);
    read_field(s, "max_edges_per_label", c.selection.max_edges_per_label);
    std::string mode;
    read_field(s, "mode", mode);
    if (!mode.empty()) c.selection.mode = parse_selection_mode(mode);
  }
  read_field(doc, "top_n", c.top_n);
  read_field(doc, "train_fraction", c.train_fraction);
  read_field(doc, "embedding_dim", c.embedding_dim);
  read_field(doc, "image_dim", c.image_dim);
  std::string pool;
  read_field(doc, "pooling", pool);
  if (!pool.empty()) c.pooling = parse_pool(pool);
  read_field(doc, "lstm_hidden", c.lstm_hidden);
  read_field(doc, "mlp_hidden", c.mlp_hidden);
  read_field(doc, "mlp_layers", c.mlp_layers);
  read_field(doc, "dropout", c.dropout);
  read_field(doc, "learning_rate", c.learning_rate);
  read_field(doc, "epochs", c.epochs);
  read_field(doc, "batch_size", c.batch_size);
  read_field(doc, "seed", c.seed);
  read_field(doc, "freeze_encoder", c.freeze_encoder);
  read_field(doc, "offline", c.offline);
  read_field(doc, "remote_url", c.remote_url);
  read_field(doc, "wups_thresholds", c.wups_thresholds);
  validate_numbers(c);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(detail::read_text(path), path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  ordered_json doc;
  ordered_json p;
  p["questions"] = c.paths.questions.string();
  p["annotations"] = c.paths.annotations.string();
  p["attributes"] = c.paths.attributes.string();
  p["embeddings"] = c.paths.embeddings.string();
  p["taxonomy"] = c.paths.taxonomy.string();
  p["knowledge_store"] = c.paths.knowledge_store.string();
  p["cache_dir"] = c.paths.cache_dir.string();
  p["work_dir"] = c.paths.work_dir.string();
  p["knowledge_dir"] = c.paths.knowledge_dir.string();
  p["checkpoint"] = c.paths.checkpoint.string();
  p["metrics"] = c.paths.metrics.string();
  p["report_dir"] = c.paths.report_dir.string();
  doc["paths"] = p;
  doc["selection"] = {{"unmatched_budget", c.selection.unmatched_budget},
                      {"extra_objects", c.selection.extra_objects},
                      {"max_edges_per_label", c.selection.max_edges_per_label},
                      {"mode", std::string(selection_mode_name(c.selection.mode))}};
  doc["top_n"] = c.top_n;
  doc["train_fraction"] = c.train_fraction;
  doc["embedding_dim"] = c.embedding_dim;
  doc["image_dim"] = c.image_dim;
  doc["pooling"] = pool_name(c.pooling);
  doc["lstm_hidden"] = c.lstm_hidden;
  doc["mlp_hidden"] = c.mlp_hidden;
  doc["mlp_layers"] = c.mlp_layers;
  doc["dropout"] = c.dropout;
  doc["learning_rate"] = c.learning_rate;
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["seed"] = c.seed;
  doc["freeze_encoder"] = c.freeze_encoder;
  doc["offline"] = c.offline;
  doc["remote_url"] = c.remote_url;
  doc["wups_thresholds"] = c.wups_thresholds;
  return doc.dump(2);
}

void validate_numbers(const RunConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (c.top_n == 0) bad("top_n must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) bad("train_fraction must lie in (0, 1)");
  if (c.embedding_dim == 0 || c.image_dim == 0) bad("feature widths must be positive");
  if (c.lstm_hidden == 0 || c.mlp_hidden == 0 || c.mlp_layers == 0) bad("model widths must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) bad("learning_rate must be positive");
  if (c.batch_size == 0) bad("batch_size must be positive");
  if (c.selection.max_edges_per_label == 0) bad("max_edges_per_label must be positive");
  for (double t : c.wups_thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) bad("WUPS thresholds must lie in [0, 1]");
  }
}

namespace {

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw Error(ErrorKind::InvalidArgument, std::string("no ") + what + " path configured");
  if (!fs::exists(path)) {
    throw Error(ErrorKind::IoFailure, std::string(what) + " not found: " + path.string());
  }
}

struct PreparedQuestion {
  QuestionRecord record;
  TokenSequence tokens;
};

// Everything prepare leaves in work_dir, loaded back.
struct Prepared {
  std::vector<PreparedQuestion> questions;
  std::unordered_map<std::int64_t, std::size_t> question_index;
  std::unordered_map<std::int64_t, AnnotationRecord> annotations;
  std::unordered_map<std::int64_t, AttributeSet> attributes;
  AnswerVocab vocab;
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> validation_ids;

  const std::vector<std::int64_t>& ids(bool train) const { return train ? train_ids : validation_ids; }
};

std::vector<std::int64_t> id_list(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw Error(ErrorKind::MalformedRecord, std::string("split.json lacks '") + key + "'");
  }
  return it->get<std::vector<std::int64_t>>();
}

Prepared load_prepared(const RunConfig& c) {
  const fs::path w = c.paths.work_dir;
  for (const char* name : {"questions.json", "annotations.json", "attributes.json", "vocab.txt", "split.json"}) {
    if (!fs::exists(w / name)) {
      throw Error(ErrorKind::IoFailure, (w / name).string() + " missing; run 'kvqa prepare' first");
    }
  }
  Prepared p;
  const json qdoc = detail::read_json(w / "questions.json");
  try {
    for (const auto& q : qdoc) {
      PreparedQuestion pq;
      pq.record.question_id = q.at("question_id").get<std::int64_t>();
      pq.record.image_id = q.at("image_id").get<std::int64_t>();
      pq.record.question = q.at("question").get<std::string>();
      pq.tokens = q.at("tokens").get<TokenSequence>();
      p.question_index[pq.record.question_id] = p.questions.size();
      p.questions.push_back(std::move(pq));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, (w / "questions.json").string() + ": " + e.what());
  }
  for (auto& a : load_annotations(w / "annotations.json")) p.annotations.emplace(a.question_id, std::move(a));
  AttributeLoadOptions opts;
  opts.feature_dim = c.image_dim;
  for (auto& s : load_attribute_file(w / "attributes.json", opts)) p.attributes.emplace(s.image_id, std::move(s));
  p.vocab = load_vocab(w / "vocab.txt");
  const json split = detail::read_json(w / "split.json");
  p.train_ids = id_list(split, "train");
  p.validation_ids = id_list(split, "validation");
  return p;
}

const AttributeSet& attributes_for(const Prepared& p, std::int64_t image_id) {
  auto it = p.attributes.find(image_id);
  if (it == p.attributes.end()) {
    throw Error(ErrorKind::UnknownImage, "no attributes for image_id " + std::to_string(image_id));
  }
  return it->second;
}

const char* split_name(bool train) { return train ? "train" : "validation"; }

fs::path knowledge_file(const RunConfig& c, bool train) {
  return c.knowledge_dir() / (std::string("knowledge_") + split_name(train) + ".json");
}

std::unordered_map<std::int64_t, std::vector<KnowledgeTriple>> load_knowledge(const RunConfig& c, bool train) {
  const auto path = knowledge_file(c, train);
  if (!fs::exists(path)) throw Error(ErrorKind::IoFailure, path.string() + " missing; run 'kvqa knowledge' first");
  std::unordered_map<std::int64_t, std::vector<KnowledgeTriple>> out;
  for (const auto& r : import_knowledge_records(path)) out[r.know_id].push_back(from_record(r));
  return out;
}

std::vector<ExampleFeatures> split_features(const RunConfig& c, const Prepared& p, bool train,
                                            const EmbeddingTable& table, const AnswerVocab& vocab) {
  const auto knowledge = load_knowledge(c, train);
  std::vector<ExampleFeatures> out;
  for (std::int64_t qid : p.ids(train)) {
    const auto& q = p.questions.at(p.question_index.at(qid));
    auto kit = knowledge.find(qid);
    std::span<const KnowledgeTriple> triples;
    if (kit != knowledge.end()) triples = kit->second;
    auto ex = build_features(attributes_for(p, q.record.image_id), q.tokens, triples, table, c.pooling);
    ex.question_id = qid;
    if (auto ait = p.annotations.find(qid); ait != p.annotations.end()) ex.target = target_class(ait->second, vocab);
    out.push_back(std::move(ex));
  }
  return out;
}

EmbeddingTable embeddings_for(const RunConfig& c) {
  require_file(c.paths.embeddings, "embeddings");
  return load_embeddings(c.paths.embeddings, c.embedding_dim);
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string threshold_label(double t) {
  std::ostringstream s;
  s << t;
  return s.str();
}

}  // namespace

ExampleFeatures build_features(const AttributeSet& attrs, const TokenSequence& tokens,
                               std::span<const KnowledgeTriple> knowledge, const EmbeddingTable& table,
                               PoolMode pooling) {
  ExampleFeatures ex;
  ex.image = pool_features(attrs, pooling);
  ex.knowledge = vectorize_knowledge(knowledge, table);
  ex.question = embed_tokens(tokens, table);
  return ex;
}

std::unique_ptr<KnowledgeSource> make_knowledge_source(const RunConfig& c) {
  auto local = [&]() -> std::unique_ptr<KnowledgeSource> {
    require_file(c.paths.knowledge_store, "knowledge store");
    return std::make_unique<LocalKnowledgeStore>(LocalKnowledgeStore::load(c.paths.knowledge_store));
  };
  if (c.offline) return local();

  std::string url = c.remote_url;
  if (url.empty()) {
    if (const char* env = std::getenv(kKnowledgeUrlEnv)) url = env;
  }
  if (url.empty()) {
    if (!c.paths.knowledge_store.empty()) return local();
    throw Error(ErrorKind::NetworkFailure,
                std::string("no knowledge endpoint: set ") + kKnowledgeUrlEnv + " or use --offline");
  }
  std::unique_ptr<KnowledgeSource> fallback;
  if (!c.paths.knowledge_store.empty() && fs::exists(c.paths.knowledge_store)) fallback = local();
  return std::make_unique<CachedKnowledgeSource>(c.cache_dir(), std::make_unique<RemoteKnowledgeSource>(url),
                                                 std::move(fallback));
}

PrepareSummary cmd_prepare(const RunConfig& c) {
  validate_numbers(c);
  require_file(c.paths.questions, "questions");
  require_file(c.paths.annotations, "annotations");
  require_file(c.paths.attributes, "attributes");

  PrepareSummary summary;
  const auto questions = load_questions(c.paths.questions);
  const auto annotations = load_annotations(c.paths.annotations);
  AttributeLoadOptions opts;
  opts.feature_dim = c.image_dim;
  const auto attributes = load_attribute_file(c.paths.attributes, opts, &summary.warnings);
  if (questions.empty()) throw Error(ErrorKind::EmptyDataset, c.paths.questions.string() + " has no questions");

  std::unordered_map<std::int64_t, bool> have_image;
  for (const auto& s : attributes) have_image[s.image_id] = true;
  for (const auto& q : questions) {
    if (!have_image.count(q.image_id)) {
      throw Error(ErrorKind::UnknownImage, "question " + std::to_string(q.question_id) + " refers to image " +
                                               std::to_string(q.image_id) + " which has no attributes");
    }
  }

  const auto examples = join_records(questions, annotations);
  const auto vocab = build_answer_vocab(annotations, c.top_n);
  const auto split = split_dataset(examples, c.train_fraction, c.seed);

  const fs::path w = c.paths.work_dir;
  std::map<std::string, std::size_t> token_counts;
  ordered_json qdoc = ordered_json::array();
  for (const auto& q : questions) {
    const auto tokens = tokenize(q.question);
    for (const auto& t : tokens) ++token_counts[t];
    qdoc.push_back({{"question_id", q.question_id},
                    {"image_id", q.image_id},
                    {"question", q.question},
                    {"tokens", tokens}});
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(token_counts.begin(), token_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string qvocab;
  for (const auto& [t, n] : ranked) qvocab += t + '\t' + std::to_string(n) + '\n';

  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> val_ids;
  for (const auto& e : split.train) train_ids.push_back(e.question.question_id);
  for (const auto& e : split.validation) val_ids.push_back(e.question.question_id);
  ordered_json sdoc;
  sdoc["seed"] = c.seed;
  sdoc["train_fraction"] = c.train_fraction;
  sdoc["train"] = train_ids;
  sdoc["validation"] = val_ids;

  detail::write_json(w / "questions.json", qdoc);
  save_annotations(annotations, w / "annotations.json");
  save_attribute_file(attributes, w / "attributes.json");
  save_vocab(vocab, w / "vocab.txt");
  detail::write_text(w / "question_vocab.txt", qvocab);
  detail::write_json(w / "split.json", sdoc);

  summary.questions = questions.size();
  summary.answer_classes = vocab.size();
  summary.question_vocab = token_counts.size();
  summary.train = train_ids.size();
  summary.validation = val_ids.size();
  return summary;
}

KnowledgeSummary cmd_knowledge(const RunConfig& c) {
  validate_numbers(c);
  const Prepared p = load_prepared(c);
  auto source = make_knowledge_source(c);
  KnowledgeSummary summary;
  for (bool train : {true, false}) {
    std::vector<KnowledgeTriple> triples;
    std::vector<std::int64_t> ids;
    for (std::int64_t qid : p.ids(train)) {
      const auto& q = p.questions.at(p.question_index.at(qid));
      for (auto& t : extract_knowledge(attributes_for(p, q.record.image_id), q.tokens, c.selection, *source)) {
        triples.push_back(std::move(t));
        ids.push_back(qid);
      }
    }
    export_knowledge_records(triples, ids, knowledge_file(c, train));
    (train ? summary.train_records : summary.validation_records) = triples.size();
  }
  return summary;
}

TrainingData load_training_data(const RunConfig& c) {
  validate_numbers(c);
  const Prepared p = load_prepared(c);
  const auto table = embeddings_for(c);
  TrainingData d;
  d.vocab = p.vocab;
  d.train = split_features(c, p, true, table, p.vocab);
  d.validation = split_features(c, p, false, table, p.vocab);
  return d;
}

TrainSummary cmd_train(const RunConfig& c) {
  const TrainingData data = load_training_data(c);
  const auto& train_set = data.train;
  const auto& val_set = data.validation;

  TrainSummary summary;
  summary.train_examples = train_set.size();
  summary.validation_examples = val_set.size();
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& ex : *set) summary.excluded += ex.target ? 0 : 1;
  }

  Checkpoint ckpt;
  ckpt.model = VqaModel::init(c.model_config(data.vocab.size()), c.seed);
  ckpt.vocab = data.vocab;
  ckpt.seed = c.seed;
  // Paths are left out so identical runs in different directories give identical bytes.
  auto settings = ordered_json::parse(run_config_to_json(c));
  settings.erase("paths");
  ckpt.run_config = settings.dump(2);
  const auto tc = c.train_config();
  summary.history = train(ckpt.model, ckpt.optimizer, train_set, val_set, tc);
  write_metrics_csv(summary.history, tc, c.metrics());
  save_checkpoint(ckpt, c.checkpoint());
  return summary;
}

EvalSummary cmd_eval(const RunConfig& c) {
  validate_numbers(c);
  const Prepared p = load_prepared(c);
  require_file(c.checkpoint(), "checkpoint");
  require_file(c.paths.taxonomy, "taxonomy");
  const Checkpoint ckpt = load_checkpoint(c.checkpoint());
  const auto taxonomy = Taxonomy::load(c.paths.taxonomy);
  const auto table = embeddings_for(c);
  const std::string mode(selection_mode_name(c.selection.mode));

  EvalSummary summary;
  for (bool train : {true, false}) {
    const auto features = split_features(c, p, train, table, ckpt.vocab);
    std::unordered_map<std::int64_t, std::string> predictions;
    std::vector<AnnotationRecord> annotations;
    for (const auto& ex : features) {
      predictions[ex.question_id] = predict(ckpt.model, ex, ckpt.vocab).answer;
      if (auto it = p.annotations.find(ex.question_id); it != p.annotations.end()) annotations.push_back(it->second);
    }
    auto report = evaluate(predictions, annotations, taxonomy, c.wups_thresholds, mode + "/" + split_name(train));
    write_report_csv(report, c.report_dir() / ("report_" + mode + "_" + split_name(train) + ".csv"));
    summary.reports.push_back(std::move(report));
  }

  // summary.json accumulates one row per mode/split across runs.
  const fs::path sjson = c.report_dir() / "summary.json";
  ordered_json rows = ordered_json::object();
  if (fs::exists(sjson)) {
    try {
      rows = ordered_json::parse(detail::read_text(sjson));
    } catch (const ordered_json::parse_error&) {
      rows = ordered_json::object();
    }
    if (!rows.is_object()) rows = ordered_json::object();
  }
  for (const auto& r : summary.reports) {
    ordered_json row;
    row["count"] = r.rows.size();
    row["exact_accuracy"] = r.exact_accuracy;
    ordered_json wups = ordered_json::object();
    for (std::size_t k = 0; k < r.thresholds.size(); ++k) wups[threshold_label(r.thresholds[k])] = r.wups_at_threshold[k];
    row["wups"] = wups;
    rows[r.label] = row;
  }
  detail::write_json(sjson, rows);

  std::ostringstream csv;
  csv << "label,count,exact_accuracy,threshold,wups\n";
  for (const auto& [label, row] : rows.items()) {
    for (const auto& [t, w] : row.at("wups").items()) {
      csv << label << ',' << row.at("count").get<std::size_t>() << ','
          << csv_number(row.at("exact_accuracy").get<double>()) << ',' << t << ',' << csv_number(w.get<double>())
          << '\n';
    }
  }
  detail::write_text(c.report_dir() / "summary.csv", csv.str());
  return summary;
}

AnswerPrediction cmd_answer(const RunConfig& c, std::int64_t image_id, const std::string& question) {
  validate_numbers(c);
  require_file(c.paths.attributes, "attributes");
  require_file(c.checkpoint(), "checkpoint");
  const auto tokens = tokenize(question);
  if (tokens.empty()) throw Error(ErrorKind::InvalidArgument, "question has no words");

  AttributeLoadOptions opts;
  opts.feature_dim = c.image_dim;
  std::optional<AttributeSet> attrs;
  for (auto& s : load_attribute_file(c.paths.attributes, opts)) {
    if (s.image_id == image_id) {
      attrs = std::move(s);
      break;
    }
  }
  if (!attrs) throw Error(ErrorKind::UnknownImage, "no attributes for image_id " + std::to_string(image_id));

  const Checkpoint ckpt = load_checkpoint(c.checkpoint());
  const auto table = embeddings_for(c);
  auto source = make_knowledge_source(c);
  const auto triples = extract_knowledge(*attrs, tokens, c.selection, *source);
  const auto ex = build_features(*attrs, tokens, triples, table, c.pooling);
  return predict(ckpt.model, ex, ckpt.vocab);
}

std::string format_answer(const AnswerPrediction& prediction) {
  std::ostringstream out;
  out << "answer: " << prediction.answer << '\n'
      << "probability: " << std::fixed << std::setprecision(4) << prediction.probability << '\n';
  if (!prediction.confident) out << "LOW-CONFIDENCE (probability <= 0.5)\n";
  return out.str();
}

}  // namespace kvqa
