#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kvqa {

struct QuestionRecord {
  std::int64_t image_id = 0;
  std::string question;
  std::int64_t question_id = 0;

  bool operator==(const QuestionRecord&) const = default;
};

struct Answer {
  std::string answer;
  std::int64_t answer_id = 0;

  bool operator==(const Answer&) const = default;
};

struct AnnotationRecord {
  std::int64_t question_id = 0;
  std::vector<Answer> answers;  // lowercased, trimmed, never empty
  std::int64_t image_id = 0;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Answer classes, most frequent first. Class index = position.
class AnswerVocab {
 public:
  AnswerVocab() = default;
  explicit AnswerVocab(std::vector<std::string> entries);

  const std::vector<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const std::string& at(std::size_t index) const { return entries_.at(index); }
  std::optional<std::size_t> index_of(const std::string& answer) const;

  bool operator==(const AnswerVocab& other) const { return entries_ == other.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A question joined with its annotation.
struct Example {
  QuestionRecord question;
  AnnotationRecord annotation;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> validation;
};

/// Keys are matched case-insensitively, so both "Question" and "question" load.
std::vector<QuestionRecord> load_questions(const std::filesystem::path& path);
void save_questions(const std::vector<QuestionRecord>& records, const std::filesystem::path& path);

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::filesystem::path& path);

/// Lowercase + trim. No stemming.
std::string normalize_answer(const std::string& raw);

/// Ranks every answer occurrence by count (descending), ties lexicographic.
AnswerVocab build_answer_vocab(const std::vector<AnnotationRecord>& annotations, std::size_t top_n);

/// One answer per line, line number = class index.
void save_vocab(const AnswerVocab& vocab, const std::filesystem::path& path);
AnswerVocab load_vocab(const std::filesystem::path& path);

/// Pairs each question with the annotation carrying the same question_id.
/// Throws MalformedRecord when a question has no annotation.
std::vector<Example> join_records(const std::vector<QuestionRecord>& questions,
                                  const std::vector<AnnotationRecord>& annotations);

/// Seeded shuffle then cut; the train side gets ceil(fraction * n) records.
/// Both sides keep the input order of their members.
DatasetSplit split_dataset(const std::vector<Example>& records, double train_fraction,
                           std::uint64_t seed);

/// Class index used as the training target: the in-vocab answer given most
/// often for this question, ties going to the more frequent vocab entry.
std::optional<std::size_t> target_class(const AnnotationRecord& annotation,
                                        const AnswerVocab& vocab);

}  // namespace kvqa
