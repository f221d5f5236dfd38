#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kvqa/ingest.hpp"
#include "kvqa/text_encoder.hpp"

namespace kvqa {

struct ModelConfig {
  std::size_t image_dim = 2048;
  std::size_t knowledge_dim = 300;
  std::size_t embed_dim = 300;
  std::size_t question_dim = 1024;  // LSTM hidden width
  std::vector<std::size_t> hidden = {1024, 1024, 1024};
  std::size_t classes = 0;
  double dropout = 0.5;

  std::size_t fused_dim() const { return image_dim + knowledge_dim + question_dim; }
  bool operator==(const ModelConfig&) const = default;
};

/// Image, knowledge and question vectors laid end to end in that order.
struct FusedFeature {
  Eigen::VectorXd vector;
  std::array<std::size_t, 3> offsets{};
  std::array<std::size_t, 3> lengths{};

  Eigen::VectorXd segment(std::size_t index) const {
    return vector.segment(static_cast<Eigen::Index>(offsets.at(index)),
                          static_cast<Eigen::Index>(lengths.at(index)));
  }
};

FusedFeature fuse(const Eigen::VectorXd& image_vec, const Eigen::VectorXd& knowledge_vec,
                  const Eigen::VectorXd& question_vec);
/// Same, but rejects segments whose lengths differ from the configuration.
FusedFeature fuse(const Eigen::VectorXd& image_vec, const Eigen::VectorXd& knowledge_vec,
                  const Eigen::VectorXd& question_vec, const ModelConfig& config);

enum class Activation { Tanh, Relu };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Hidden layers use tanh first, rectifiers after; the output layer feeds softmax.
struct MlpParams {
  std::vector<DenseLayer> hidden;
  std::vector<Activation> activations;
  DenseLayer output;
  double dropout = 0.5;

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpParams random(std::size_t input_dim, const std::vector<std::size_t>& widths,
                          std::size_t classes, double dropout, std::uint64_t seed);
  std::size_t input_dim() const;
  std::size_t classes() const { return static_cast<std::size_t>(output.bias.size()); }
};

struct MlpGrads {
  std::vector<DenseLayer> hidden;
  DenseLayer output;

  static MlpGrads zeros_like(const MlpParams& params);
  void set_zero();
};

struct MlpTrace {
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> activated;  // per hidden layer, before dropout
  std::vector<Eigen::VectorXd> masks;      // 0 or 1/(1-rate); all ones outside training
  std::vector<Eigen::VectorXd> outputs;    // activated .* mask
  Eigen::VectorXd logits;
  Eigen::VectorXd probabilities;
};

/// Y': probabilities over the answer classes.
struct AnswerDistribution {
  Eigen::VectorXd probabilities;
};

/// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Dropout masks come from `seed` and are only drawn when train_mode is set.
MlpTrace mlp_forward(const Eigen::VectorXd& input, const MlpParams& params, bool train_mode,
                     std::uint64_t seed);
AnswerDistribution forward(const FusedFeature& z, const MlpParams& params, bool train_mode,
                           std::uint64_t seed);

inline constexpr double kLogFloor = 1e-12;

/// Categorical cross-entropy -sum(y * log(max(y', 1e-12))).
double loss(const Eigen::VectorXd& target, const AnswerDistribution& prediction);

Eigen::VectorXd one_hot(std::size_t index, std::size_t classes);

/// Accumulates scale * dLoss/dparams into grads; returns scale * dLoss/dinput.
Eigen::VectorXd mlp_backward(const MlpTrace& trace, const MlpParams& params,
                             const Eigen::VectorXd& target, MlpGrads& grads, double scale = 1.0);

/// LSTM question encoder followed by the MLP classifier.
struct VqaModel {
  ModelConfig config;
  LstmParams encoder;
  MlpParams classifier;

  static VqaModel init(const ModelConfig& config, std::uint64_t seed);
};

struct ModelGrads {
  LstmGrads encoder;
  MlpGrads classifier;

  static ModelGrads zeros_like(const VqaModel& model);
  void set_zero();
};

/// Everything the model needs for one question.
struct ExampleFeatures {
  std::int64_t question_id = 0;
  Eigen::VectorXd image;
  Eigen::VectorXd knowledge;
  Eigen::MatrixXd question;  // embedded tokens, one column per token
  std::optional<std::size_t> target;
};

AnswerDistribution predict_distribution(const VqaModel& model, const ExampleFeatures& example);

/// Forward + backward for one example. Returns the unscaled loss.
double accumulate_gradients(const VqaModel& model, const ExampleFeatures& example,
                            const Eigen::VectorXd& target, bool train_mode, std::uint64_t seed,
                            ModelGrads& grads, double scale = 1.0, bool include_encoder = true);

/// Flat view of one parameter tensor and its gradient.
struct ParamSlot {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool frozen = false;

  std::size_t size() const { return rows * cols; }
};

/// Declared order: encoder tensors, then hidden layers, then output layer.
std::vector<ParamSlot> parameter_slots(VqaModel& model, const ModelGrads& grads,
                                       bool freeze_encoder = false);

struct OptimizerState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
  std::vector<Eigen::VectorXd> v_hat;
};

/// AMSGrad without bias correction:
///   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2;  v_hat = max(v_hat, v);
///   theta -= lr * m / (sqrt(v_hat) + eps)
/// Moment buffers are created on the first call. Frozen slots are skipped.
void amsgrad_step(std::span<const ParamSlot> params, OptimizerState& state);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  std::uint64_t seed = 7;
  bool freeze_encoder = false;
};

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 0 = before any update
  SplitMetrics train;
  SplitMetrics validation;
};

/// Inference-mode loss and accuracy over examples that have a target.
SplitMetrics measure(const VqaModel& model, std::span<const ExampleFeatures> examples);

/// Mini-batch training with a seeded per-epoch shuffle and batch-averaged
/// gradients. Examples without a target are skipped.
std::vector<EpochMetrics> train(VqaModel& model, OptimizerState& state,
                                std::span<const ExampleFeatures> train_set,
                                std::span<const ExampleFeatures> validation_set,
                                const TrainConfig& config);

void write_metrics_csv(const std::vector<EpochMetrics>& history, const TrainConfig& config,
                       const std::filesystem::path& path);

struct AnswerPrediction {
  std::string answer;
  std::size_t class_index = 0;
  double probability = 0.0;
  bool confident = false;  // probability > 0.5
};

/// Argmax with ties to the lowest class index.
AnswerPrediction predict(const AnswerDistribution& distribution, const AnswerVocab& vocab);
AnswerPrediction predict(const VqaModel& model, const ExampleFeatures& example,
                         const AnswerVocab& vocab);

struct Checkpoint {
  VqaModel model;
  OptimizerState optimizer;
  AnswerVocab vocab;
  std::uint64_t seed = 0;
  std::string run_config;  // JSON text of the run that produced it
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary: magic, version, JSON header, tensors in declared order, end marker.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws IoFailure or VersionMismatch; never returns a partial checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kvqa
