#pragma once

// The five pipeline stages behind the command-line tool. Every stage reads
// and writes plain JSON/CSV so intermediate results can be inspected.
//
//   prepare    questions + annotations + attributes -> work_dir
//   knowledge  work_dir -> knowledge_dir/knowledge_{train,validation}.json
//   train      work_dir + knowledge_dir + embeddings -> checkpoint, metrics CSV
//   eval       checkpoint -> report_dir/{report_*.csv, summary.json, summary.csv}
//   answer     checkpoint + one image/question -> printed answer

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "kvqa/eval.hpp"
#include "kvqa/image_attributes.hpp"
#include "kvqa/knowledge.hpp"
#include "kvqa/model.hpp"

namespace kvqa {

inline constexpr const char* kKnowledgeUrlEnv = "KVQA_KNOWLEDGE_URL";

struct RunPaths {
  std::filesystem::path questions;
  std::filesystem::path annotations;
  std::filesystem::path attributes;
  std::filesystem::path embeddings;
  std::filesystem::path taxonomy;
  std::filesystem::path knowledge_store;
  std::filesystem::path cache_dir;      // default: work_dir/knowledge_cache
  std::filesystem::path work_dir = "work";
  std::filesystem::path knowledge_dir;  // default: work_dir
  std::filesystem::path checkpoint;     // default: work_dir/model.ckpt
  std::filesystem::path metrics;        // default: work_dir/metrics.csv
  std::filesystem::path report_dir;     // default: work_dir/reports
};

struct RunConfig {
  RunPaths paths;
  SelectionConfig selection;

  std::size_t top_n = 2000;
  double train_fraction = 0.8;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::size_t image_dim = kRegionFeatureDim;
  PoolMode pooling = PoolMode::Sum;

  std::size_t lstm_hidden = 1024;
  std::size_t mlp_hidden = 1024;
  std::size_t mlp_layers = 3;
  double dropout = 0.5;
  double learning_rate = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_size = 100;
  std::uint64_t seed = 7;
  bool freeze_encoder = false;

  bool offline = false;
  std::string remote_url;  // empty: taken from KVQA_KNOWLEDGE_URL
  std::vector<double> wups_thresholds = {0.9, 0.0};

  std::filesystem::path knowledge_dir() const;
  std::filesystem::path cache_dir() const;
  std::filesystem::path checkpoint() const;
  std::filesystem::path metrics() const;
  std::filesystem::path report_dir() const;

  ModelConfig model_config(std::size_t classes) const;
  TrainConfig train_config() const;
};

/// Fields absent from the document keep their defaults. Relative paths are
/// resolved against base_dir.
RunConfig run_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Throws InvalidArgument for out-of-range numbers.
void validate_numbers(const RunConfig& config);

struct PrepareSummary {
  std::size_t questions = 0;
  std::size_t answer_classes = 0;
  std::size_t question_vocab = 0;
  std::size_t train = 0;
  std::size_t validation = 0;
  std::vector<std::string> warnings;
};

struct KnowledgeSummary {
  std::size_t train_records = 0;
  std::size_t validation_records = 0;
};

struct TrainSummary {
  std::vector<EpochMetrics> history;
  std::size_t train_examples = 0;
  std::size_t validation_examples = 0;
  std::size_t excluded = 0;
};

struct EvalSummary {
  std::vector<EvalReport> reports;  // train, then validation
};

/// Feature sets built from the prepared files and exported knowledge.
struct TrainingData {
  AnswerVocab vocab;
  std::vector<ExampleFeatures> train;
  std::vector<ExampleFeatures> validation;
};

TrainingData load_training_data(const RunConfig& config);

PrepareSummary cmd_prepare(const RunConfig& config);
KnowledgeSummary cmd_knowledge(const RunConfig& config);
TrainSummary cmd_train(const RunConfig& config);
EvalSummary cmd_eval(const RunConfig& config);
AnswerPrediction cmd_answer(const RunConfig& config, std::int64_t image_id, const std::string& question);

/// "answer: X\nprobability: P" plus a LOW-CONFIDENCE line at or below 0.5.
std::string format_answer(const AnswerPrediction& prediction);

/// Offline store, cached remote client, or store fallback, per the config.
std::unique_ptr<KnowledgeSource> make_knowledge_source(const RunConfig& config);

/// Model inputs for one question.
ExampleFeatures build_features(const AttributeSet& attrs, const TokenSequence& tokens,
                               std::span<const KnowledgeTriple> knowledge, const EmbeddingTable& table,
                               PoolMode pooling);

}  // namespace kvqa
