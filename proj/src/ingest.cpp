#include "kvqa/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace {

using nlohmann::json;

std::string where(const std::filesystem::path& path, std::size_t index) {
  return path.string() + " entry " + std::to_string(index);
}

const json& require(const json& obj, const std::string& key, const std::filesystem::path& path,
                    std::size_t index) {
  const json* value = detail::find_key(obj, key);
  if (value == nullptr) {
    throw Error(ErrorKind::MalformedRecord, where(path, index) + ": missing key '" + key + "'");
  }
  return *value;
}

std::int64_t require_int(const json& obj, const std::string& key,
                         const std::filesystem::path& path, std::size_t index) {
  const json& value = require(obj, key, path, index);
  if (!value.is_number_integer()) {
    throw Error(ErrorKind::MalformedRecord,
                where(path, index) + ": key '" + key + "' is not an integer");
  }
  return value.get<std::int64_t>();
}

std::string require_string(const json& obj, const std::string& key,
                           const std::filesystem::path& path, std::size_t index) {
  const json& value = require(obj, key, path, index);
  if (!value.is_string()) {
    throw Error(ErrorKind::MalformedRecord,
                where(path, index) + ": key '" + key + "' is not a string");
  }
  return value.get<std::string>();
}

const json& require_array(const json& doc, const std::filesystem::path& path) {
  if (!doc.is_array()) {
    throw Error(ErrorKind::MalformedRecord, path.string() + ": top level must be an array");
  }
  return doc;
}

}  // namespace

AnswerVocab::AnswerVocab(std::vector<std::string> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], i).second) {
      throw Error(ErrorKind::MalformedRecord, "duplicate vocabulary entry '" + entries_[i] + "'");
    }
  }
}

std::optional<std::size_t> AnswerVocab::index_of(const std::string& answer) const {
  auto it = index_.find(answer);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
  const json doc = detail::read_json(path);
  std::vector<QuestionRecord> records;
  std::unordered_set<std::int64_t> seen;
  std::size_t index = 0;
  for (const json& entry : require_array(doc, path)) {
    QuestionRecord rec;
    rec.image_id = require_int(entry, "image_id", path, index);
    rec.question = require_string(entry, "question", path, index);
    rec.question_id = require_int(entry, "question_id", path, index);
    if (detail::trim(rec.question).empty()) {
      throw Error(ErrorKind::MalformedRecord, where(path, index) + ": empty question");
    }
    if (!seen.insert(rec.question_id).second) {
      throw Error(ErrorKind::MalformedRecord,
                  where(path, index) + ": duplicate question_id " + std::to_string(rec.question_id));
    }
    records.push_back(std::move(rec));
    ++index;
  }
  return records;
}

void save_questions(const std::vector<QuestionRecord>& records, const std::filesystem::path& path) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& rec : records) {
    nlohmann::ordered_json entry;
    entry["image_id"] = rec.image_id;
    entry["Question"] = rec.question;
    entry["question_id"] = rec.question_id;
    doc.push_back(std::move(entry));
  }
  detail::write_json(path, doc);
}

std::string normalize_answer(const std::string& raw) { return detail::to_lower(detail::trim(raw)); }

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  const json doc = detail::read_json(path);
  std::vector<AnnotationRecord> records;
  std::size_t index = 0;
  for (const json& entry : require_array(doc, path)) {
    AnnotationRecord rec;
    rec.question_id = require_int(entry, "question_id", path, index);
    rec.image_id = require_int(entry, "image_id", path, index);
    const json& answers = require(entry, "answers", path, index);
    if (!answers.is_array() || answers.empty()) {
      throw Error(ErrorKind::MalformedRecord,
                  where(path, index) + ": answers must be a non-empty array");
    }
    std::size_t answer_index = 0;
    for (const json& a : answers) {
      Answer ans;
      if (a.is_string()) {
        // Bare strings are accepted; ids then follow list position.
        ans.answer = a.get<std::string>();
        ans.answer_id = static_cast<std::int64_t>(answer_index + 1);
      } else {
        ans.answer = require_string(a, "answer", path, index);
        ans.answer_id = require_int(a, "answer_id", path, index);
      }
      ans.answer = normalize_answer(ans.answer);
      if (ans.answer.empty()) {
        throw Error(ErrorKind::MalformedRecord, where(path, index) + ": empty answer");
      }
      rec.answers.push_back(std::move(ans));
      ++answer_index;
    }
    records.push_back(std::move(rec));
    ++index;
  }
  return records;
}

void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::filesystem::path& path) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& rec : records) {
    nlohmann::ordered_json entry;
    entry["image_id"] = rec.image_id;
    entry["question_id"] = rec.question_id;
    nlohmann::ordered_json answers = nlohmann::ordered_json::array();
    for (const auto& a : rec.answers) {
      answers.push_back({{"answer", a.answer}, {"answer_id", a.answer_id}});
    }
    entry["answers"] = std::move(answers);
    doc.push_back(std::move(entry));
  }
  detail::write_json(path, doc);
}

AnswerVocab build_answer_vocab(const std::vector<AnnotationRecord>& annotations,
                               std::size_t top_n) {
  if (top_n == 0) {
    throw Error(ErrorKind::InvalidArgument, "top_n must be at least 1");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& rec : annotations) {
    for (const auto& a : rec.answers) ++counts[a.answer];
  }
  if (counts.empty()) {
    throw Error(ErrorKind::EmptyDataset, "no answers to build a vocabulary from");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort on count keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  std::vector<std::string> entries;
  entries.reserve(ranked.size());
  for (auto& [answer, count] : ranked) entries.push_back(answer);
  return AnswerVocab(std::move(entries));
}

void save_vocab(const AnswerVocab& vocab, const std::filesystem::path& path) {
  std::string text;
  for (const auto& entry : vocab.entries()) {
    text += entry;
    text += '\n';
  }
  detail::write_text(path, text);
}

AnswerVocab load_vocab(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text(path));
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw Error(ErrorKind::MalformedRecord,
                  path.string() + " line " + std::to_string(entries.size() + 1) + ": empty entry");
    }
    entries.push_back(line);
  }
  return AnswerVocab(std::move(entries));
}

std::vector<Example> join_records(const std::vector<QuestionRecord>& questions,
                                  const std::vector<AnnotationRecord>& annotations) {
  std::unordered_map<std::int64_t, const AnnotationRecord*> by_id;
  for (const auto& a : annotations) by_id.emplace(a.question_id, &a);
  std::vector<Example> joined;
  joined.reserve(questions.size());
  for (const auto& q : questions) {
    auto it = by_id.find(q.question_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::MalformedRecord,
                  "question_id " + std::to_string(q.question_id) + " has no annotation");
    }
    joined.push_back(Example{q, *it->second});
  }
  return joined;
}

DatasetSplit split_dataset(const std::vector<Example>& records, double train_fraction,
                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  if (records.empty()) {
    throw Error(ErrorKind::EmptyDataset, "cannot split an empty dataset");
  }
  std::set<std::int64_t> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.question.question_id).second) {
      throw Error(ErrorKind::MalformedRecord,
                  "duplicate question_id " + std::to_string(r.question.question_id));
    }
  }
  const std::size_t n = records.size();
  // The epsilon keeps products like 0.7 * 10 from rounding up past 7.
  auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  detail::seeded_shuffle(order, rng);

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? split.train : split.validation).push_back(records[i]);
  }
  return split;
}

std::optional<std::size_t> target_class(const AnnotationRecord& annotation,
                                        const AnswerVocab& vocab) {
  std::map<std::size_t, std::size_t> votes;
  for (const auto& a : annotation.answers) {
    if (auto idx = vocab.index_of(a.answer)) ++votes[*idx];
  }
  std::optional<std::size_t> best;
  std::size_t best_votes = 0;
  for (const auto& [idx, count] : votes) {
    if (count > best_votes) {
      best = idx;
      best_votes = count;
    }
  }
  return best;
}

}  // namespace kvqa
