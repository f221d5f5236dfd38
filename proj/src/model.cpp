#include "kvqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace {

using Eigen::Index;

Index idx(std::size_t n) { return static_cast<Index>(n); }

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

DenseLayer random_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer{Eigen::MatrixXd(idx(out), idx(in)), Eigen::VectorXd(idx(out))};
  for (Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = bound * (2.0 * unit_draw(rng) - 1.0);
  for (Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = bound * (2.0 * unit_draw(rng) - 1.0);
  return layer;
}

DenseLayer zero_layer_like(const DenseLayer& layer) {
  return DenseLayer{Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                    Eigen::VectorXd::Zero(layer.bias.size())};
}

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs expected " + std::to_string(b);
}

}  // namespace

FusedFeature fuse(const Eigen::VectorXd& image_vec, const Eigen::VectorXd& knowledge_vec,
                  const Eigen::VectorXd& question_vec) {
  FusedFeature z;
  z.lengths = {static_cast<std::size_t>(image_vec.size()), static_cast<std::size_t>(knowledge_vec.size()),
               static_cast<std::size_t>(question_vec.size())};
  z.offsets = {0, z.lengths[0], z.lengths[0] + z.lengths[1]};
  z.vector.resize(image_vec.size() + knowledge_vec.size() + question_vec.size());
  z.vector << image_vec, knowledge_vec, question_vec;
  return z;
}

FusedFeature fuse(const Eigen::VectorXd& image_vec, const Eigen::VectorXd& knowledge_vec,
                  const Eigen::VectorXd& question_vec, const ModelConfig& config) {
  if (static_cast<std::size_t>(image_vec.size()) != config.image_dim) {
    throw Error(ErrorKind::DimensionMismatch, "image segment " + dims(image_vec.size(), config.image_dim));
  }
  if (static_cast<std::size_t>(knowledge_vec.size()) != config.knowledge_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "knowledge segment " + dims(knowledge_vec.size(), config.knowledge_dim));
  }
  if (static_cast<std::size_t>(question_vec.size()) != config.question_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "question segment " + dims(question_vec.size(), config.question_dim));
  }
  return fuse(image_vec, knowledge_vec, question_vec);
}

MlpParams MlpParams::random(std::size_t input_dim, const std::vector<std::size_t>& widths,
                            std::size_t classes, double dropout, std::uint64_t seed) {
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "dropout must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.dropout = dropout;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    p.hidden.push_back(random_layer(in, widths[i], rng));
    p.activations.push_back(i == 0 ? Activation::Tanh : Activation::Relu);
    in = widths[i];
  }
  p.output = random_layer(in, classes, rng);
  return p;
}

std::size_t MlpParams::input_dim() const {
  const DenseLayer& first = hidden.empty() ? output : hidden.front();
  return static_cast<std::size_t>(first.weight.cols());
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  for (const auto& layer : params.hidden) g.hidden.push_back(zero_layer_like(layer));
  g.output = zero_layer_like(params.output);
  return g;
}

void MlpGrads::set_zero() {
  for (auto& layer : hidden) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  output.weight.setZero();
  output.bias.setZero();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) return logits;
  Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

MlpTrace mlp_forward(const Eigen::VectorXd& input, const MlpParams& params, bool train_mode,
                     std::uint64_t seed) {
  if (static_cast<std::size_t>(input.size()) != params.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "classifier input " + dims(input.size(), params.input_dim()));
  }
  MlpTrace tr;
  tr.input = input;
  std::mt19937_64 rng(seed);
  const double keep = 1.0 - params.dropout;
  const Eigen::VectorXd* x = &tr.input;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    Eigen::VectorXd a = params.hidden[l].weight * *x + params.hidden[l].bias;
    if (params.activations[l] == Activation::Tanh) {
      a = a.array().tanh().matrix();
    } else {
      a = a.cwiseMax(0.0);
    }
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(a.size());
    if (train_mode && params.dropout > 0.0) {
      for (Index i = 0; i < mask.size(); ++i) mask[i] = unit_draw(rng) < keep ? 1.0 / keep : 0.0;
    }
    tr.outputs.push_back(a.cwiseProduct(mask));
    tr.activated.push_back(std::move(a));
    tr.masks.push_back(std::move(mask));
    x = &tr.outputs.back();
  }
  tr.logits = params.output.weight * *x + params.output.bias;
  tr.probabilities = softmax(tr.logits);
  return tr;
}

AnswerDistribution forward(const FusedFeature& z, const MlpParams& params, bool train_mode,
                           std::uint64_t seed) {
  return AnswerDistribution{mlp_forward(z.vector, params, train_mode, seed).probabilities};
}

double loss(const Eigen::VectorXd& target, const AnswerDistribution& prediction) {
  if (target.size() != prediction.probabilities.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "target " + dims(target.size(), prediction.probabilities.size()));
  }
  double total = 0.0;
  for (Index i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) total -= target[i] * std::log(std::max(prediction.probabilities[i], kLogFloor));
  }
  return total;
}

Eigen::VectorXd one_hot(std::size_t index, std::size_t classes) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(idx(classes));
  y[idx(index)] = 1.0;
  return y;
}

Eigen::VectorXd mlp_backward(const MlpTrace& trace, const MlpParams& params,
                             const Eigen::VectorXd& target, MlpGrads& grads, double scale) {
  // Softmax + cross-entropy: dL/dlogits = p * sum(y) - y.
  Eigen::VectorXd delta = scale * (trace.probabilities * target.sum() - target);
  const Eigen::VectorXd& last = params.hidden.empty() ? trace.input : trace.outputs.back();
  grads.output.weight.noalias() += delta * last.transpose();
  grads.output.bias += delta;
  Eigen::VectorXd d_x = params.output.weight.transpose() * delta;

  for (std::size_t l = params.hidden.size(); l-- > 0;) {
    Eigen::VectorXd d_a = d_x.cwiseProduct(trace.masks[l]);
    const Eigen::VectorXd& a = trace.activated[l];
    if (params.activations[l] == Activation::Tanh) {
      d_a = d_a.cwiseProduct((1.0 - a.array().square()).matrix());
    } else {
      d_a = d_a.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
    }
    const Eigen::VectorXd& in = l == 0 ? trace.input : trace.outputs[l - 1];
    grads.hidden[l].weight.noalias() += d_a * in.transpose();
    grads.hidden[l].bias += d_a;
    d_x = params.hidden[l].weight.transpose() * d_a;
  }
  return d_x;
}

VqaModel VqaModel::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.classes == 0) throw Error(ErrorKind::InvalidArgument, "model needs at least one class");
  VqaModel m;
  m.config = config;
  m.encoder = LstmParams::random(config.embed_dim, config.question_dim, detail::mix_seed(seed, 1));
  m.classifier = MlpParams::random(config.fused_dim(), config.hidden, config.classes, config.dropout,
                                   detail::mix_seed(seed, 2));
  return m;
}

ModelGrads ModelGrads::zeros_like(const VqaModel& model) {
  return ModelGrads{LstmGrads::zeros_like(model.encoder), MlpGrads::zeros_like(model.classifier)};
}

void ModelGrads::set_zero() {
  encoder.set_zero();
  classifier.set_zero();
}

AnswerDistribution predict_distribution(const VqaModel& model, const ExampleFeatures& example) {
  const QuestionEncoding q = lstm_encode(example.question, model.encoder);
  const FusedFeature z = fuse(example.image, example.knowledge, q.vector, model.config);
  return forward(z, model.classifier, false, 0);
}

double accumulate_gradients(const VqaModel& model, const ExampleFeatures& example,
                            const Eigen::VectorXd& target, bool train_mode, std::uint64_t seed,
                            ModelGrads& grads, double scale, bool include_encoder) {
  const LstmTrace lstm = lstm_forward(example.question, model.encoder);
  const FusedFeature z = fuse(example.image, example.knowledge, lstm.final_hidden(), model.config);
  const MlpTrace mlp = mlp_forward(z.vector, model.classifier, train_mode, seed);
  const double value = loss(target, AnswerDistribution{mlp.probabilities});
  const Eigen::VectorXd d_z = mlp_backward(mlp, model.classifier, target, grads.classifier, scale);
  if (include_encoder && lstm.steps() > 0) {
    const Eigen::VectorXd d_question = d_z.segment(idx(z.offsets[2]), idx(z.lengths[2]));
    lstm_backward(lstm, model.encoder, d_question, grads.encoder);
  }
  return value;
}

std::vector<ParamSlot> parameter_slots(VqaModel& model, const ModelGrads& grads, bool freeze_encoder) {
  std::vector<ParamSlot> slots;
  auto add = [&slots](std::string name, auto& value, const auto& grad, bool frozen) {
    slots.push_back(ParamSlot{std::move(name), value.data(), grad.data(),
                              static_cast<std::size_t>(value.rows()),
                              static_cast<std::size_t>(value.cols()), frozen});
  };
  add("encoder.w_input", model.encoder.w_input, grads.encoder.w_input, freeze_encoder);
  add("encoder.w_hidden", model.encoder.w_hidden, grads.encoder.w_hidden, freeze_encoder);
  add("encoder.bias", model.encoder.bias, grads.encoder.bias, freeze_encoder);
  for (std::size_t l = 0; l < model.classifier.hidden.size(); ++l) {
    const std::string prefix = "classifier.hidden" + std::to_string(l);
    add(prefix + ".weight", model.classifier.hidden[l].weight, grads.classifier.hidden[l].weight, false);
    add(prefix + ".bias", model.classifier.hidden[l].bias, grads.classifier.hidden[l].bias, false);
  }
  add("classifier.output.weight", model.classifier.output.weight, grads.classifier.output.weight, false);
  add("classifier.output.bias", model.classifier.output.bias, grads.classifier.output.bias, false);
  return slots;
}

void amsgrad_step(std::span<const ParamSlot> params, OptimizerState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::VectorXd::Zero(idx(p.size())));
      state.v.push_back(Eigen::VectorXd::Zero(idx(p.size())));
      state.v_hat.push_back(Eigen::VectorXd::Zero(idx(p.size())));
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorKind::DimensionMismatch, "optimizer state tracks " + dims(state.m.size(), params.size()) +
                                                  " tensors");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamSlot& p = params[k];
    if (static_cast<std::size_t>(state.m[k].size()) != p.size()) {
      throw Error(ErrorKind::DimensionMismatch, "optimizer state for " + p.name);
    }
    if (p.frozen) continue;
    Eigen::Map<Eigen::ArrayXd> theta(p.value, idx(p.size()));
    Eigen::Map<const Eigen::ArrayXd> g(p.grad, idx(p.size()));
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    auto v_hat = state.v_hat[k].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    v_hat = v_hat.max(v);
    theta -= state.learning_rate * m / (v_hat.sqrt() + state.epsilon);
  }
  ++state.step;
}

SplitMetrics measure(const VqaModel& model, std::span<const ExampleFeatures> examples) {
  SplitMetrics out;
  double total_loss = 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (!ex.target) continue;
    const AnswerDistribution dist = predict_distribution(model, ex);
    total_loss += loss(one_hot(*ex.target, model.config.classes), dist);
    Index best = 0;
    dist.probabilities.maxCoeff(&best);
    if (static_cast<std::size_t>(best) == *ex.target) ++correct;
    ++out.count;
  }
  if (out.count == 0) {
    out.loss = std::numeric_limits<double>::quiet_NaN();
    out.accuracy = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.loss = total_loss / static_cast<double>(out.count);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.count);
  return out;
}

std::vector<EpochMetrics> train(VqaModel& model, OptimizerState& state,
                                std::span<const ExampleFeatures> train_set,
                                std::span<const ExampleFeatures> validation_set,
                                const TrainConfig& config) {
  if (config.batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be at least 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].target) usable.push_back(i);
  }
  if (usable.empty()) throw Error(ErrorKind::EmptyDataset, "no training example has an in-vocabulary answer");

  state.learning_rate = config.learning_rate;
  ModelGrads grads = ModelGrads::zeros_like(model);
  const std::vector<ParamSlot> slots = parameter_slots(model, grads, config.freeze_encoder);

  std::vector<EpochMetrics> history;
  history.push_back(EpochMetrics{0, measure(model, train_set), measure(model, validation_set)});

  std::mt19937_64 shuffle_rng(detail::mix_seed(config.seed, 0x5eed));
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    detail::seeded_shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.set_zero();
      for (std::size_t pos = start; pos < end; ++pos) {
        const ExampleFeatures& ex = train_set[order[pos]];
        const std::uint64_t mask_seed = detail::mix_seed(detail::mix_seed(config.seed, epoch), pos);
        accumulate_gradients(model, ex, one_hot(*ex.target, model.config.classes), true, mask_seed, grads,
                             scale, !config.freeze_encoder);
      }
      amsgrad_step(slots, state);
    }
    history.push_back(EpochMetrics{epoch, measure(model, train_set), measure(model, validation_set)});
  }
  return history;
}

void write_metrics_csv(const std::vector<EpochMetrics>& history, const TrainConfig& config,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# epochs=" << config.epochs << " batch_size=" << config.batch_size
      << " learning_rate=" << config.learning_rate << " seed=" << config.seed << "\n";
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  out << std::setprecision(17);
  for (const auto& row : history) {
    out << row.epoch << ',' << row.train.loss << ',' << row.train.accuracy << ',' << row.validation.loss << ','
        << row.validation.accuracy << '\n';
  }
  detail::write_text(path, out.str());
}

AnswerPrediction predict(const AnswerDistribution& distribution, const AnswerVocab& vocab) {
  const Eigen::VectorXd& p = distribution.probabilities;
  if (p.size() == 0 || static_cast<std::size_t>(p.size()) != vocab.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "distribution over " + dims(p.size(), vocab.size()) + " answers");
  }
  Index best = 0;
  for (Index i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  AnswerPrediction out;
  out.class_index = static_cast<std::size_t>(best);
  out.answer = vocab.at(out.class_index);
  out.probability = p[best];
  out.confident = out.probability > 0.5;
  return out;
}

AnswerPrediction predict(const VqaModel& model, const ExampleFeatures& example, const AnswerVocab& vocab) {
  return predict(predict_distribution(model, example), vocab);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'K', 'V', 'Q', 'A', 'C', 'K', 'P', 'T'};
constexpr char kEndMarker[8] = {'K', 'V', 'Q', 'A', 'E', 'N', 'D', '\0'};

class Writer {
 public:
  template <typename T>
  void pod(const T& value) {
    const auto* bytes = reinterpret_cast<const char*>(&value);
    buf_.append(bytes, sizeof(T));
  }
  void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  void tensor(const std::string& name, const double* data, std::size_t rows, std::size_t cols) {
    str(name);
    pod<std::uint64_t>(rows);
    pod<std::uint64_t>(cols);
    raw(data, rows * cols * sizeof(double));
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}

  void need(std::size_t n) {
    if (buf_.size() - pos_ < n) throw Error(ErrorKind::IoFailure, origin_ + ": truncated checkpoint");
  }
  template <typename T>
  T pod() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void tensor(const std::string& expected_name, double* data, std::size_t rows, std::size_t cols) {
    const std::string name = str();
    const auto r = pod<std::uint64_t>();
    const auto c = pod<std::uint64_t>();
    if (name != expected_name || r != rows || c != cols) {
      throw Error(ErrorKind::VersionMismatch, origin_ + ": tensor '" + name + "' does not match '" +
                                                  expected_name + "' of the declared layout");
    }
    need(rows * cols * sizeof(double));
    std::memcpy(data, buf_.data() + pos_, rows * cols * sizeof(double));
    pos_ += rows * cols * sizeof(double);
  }
  void bytes(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"image_dim", c.image_dim},       {"knowledge_dim", c.knowledge_dim}, {"embed_dim", c.embed_dim},
          {"question_dim", c.question_dim}, {"hidden", c.hidden},               {"classes", c.classes},
          {"dropout", c.dropout}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_dim = j.at("image_dim").get<std::size_t>();
  c.knowledge_dim = j.at("knowledge_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.question_dim = j.at("question_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.classes = j.at("classes").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  VqaModel model = checkpoint.model;
  ModelGrads shapes = ModelGrads::zeros_like(model);
  const std::vector<ParamSlot> slots = parameter_slots(model, shapes);
  const OptimizerState& opt = checkpoint.optimizer;
  const bool has_moments = !opt.m.empty();
  if (has_moments && opt.m.size() != slots.size()) {
    throw Error(ErrorKind::DimensionMismatch, "optimizer state does not match the model");
  }

  nlohmann::json header;
  header["model"] = config_to_json(model.config);
  header["optimizer"] = {{"learning_rate", opt.learning_rate}, {"beta1", opt.beta1},  {"beta2", opt.beta2},
                         {"epsilon", opt.epsilon},             {"step", opt.step}, {"moments", has_moments}};
  header["seed"] = checkpoint.seed;
  header["vocab"] = checkpoint.vocab.entries();
  header["run_config"] = checkpoint.run_config;

  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(header.dump());
  w.pod<std::uint64_t>(slots.size() * (has_moments ? 4 : 1));
  // Matrices are stored column-major.
  for (std::size_t k = 0; k < slots.size(); ++k) {
    w.tensor(slots[k].name, slots[k].value, slots[k].rows, slots[k].cols);
  }
  if (has_moments) {
    const std::pair<const char*, const std::vector<Eigen::VectorXd>*> groups[] = {
        {"m.", &opt.m}, {"v.", &opt.v}, {"v_hat.", &opt.v_hat}};
    for (const auto& [prefix, buffers] : groups) {
      for (std::size_t k = 0; k < slots.size(); ++k) {
        w.tensor(prefix + slots[k].name, (*buffers)[k].data(), slots[k].size(), 1);
      }
    }
  }
  w.raw(kEndMarker, sizeof kEndMarker);
  detail::write_text(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = detail::read_text(path);
  Reader r(buf, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": not a checkpoint file");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch,
                path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": bad header: " + e.what());
  }

  Checkpoint ck;
  try {
    ck.model.config = config_from_json(header.at("model"));
    const auto& o = header.at("optimizer");
    ck.optimizer.learning_rate = o.at("learning_rate").get<double>();
    ck.optimizer.beta1 = o.at("beta1").get<double>();
    ck.optimizer.beta2 = o.at("beta2").get<double>();
    ck.optimizer.epsilon = o.at("epsilon").get<double>();
    ck.optimizer.step = o.at("step").get<std::uint64_t>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.vocab = AnswerVocab(header.at("vocab").get<std::vector<std::string>>());
    ck.run_config = header.at("run_config").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": bad header: " + e.what());
  }
  const bool has_moments = header["optimizer"].value("moments", false);

  // Shape the tensors from the config, then fill them in declared order.
  ck.model = VqaModel::init(ck.model.config, 0);
  ModelGrads shapes = ModelGrads::zeros_like(ck.model);
  const std::vector<ParamSlot> slots = parameter_slots(ck.model, shapes);
  const auto count = r.pod<std::uint64_t>();
  if (count != slots.size() * (has_moments ? 4 : 1)) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": unexpected tensor count");
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    r.tensor(slots[k].name, slots[k].value, slots[k].rows, slots[k].cols);
  }
  if (has_moments) {
    std::vector<Eigen::VectorXd>* groups[] = {&ck.optimizer.m, &ck.optimizer.v, &ck.optimizer.v_hat};
    const char* prefixes[] = {"m.", "v.", "v_hat."};
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t k = 0; k < slots.size(); ++k) {
        Eigen::VectorXd buffer(idx(slots[k].size()));
        r.tensor(prefixes[g] + slots[k].name, buffer.data(), slots[k].size(), 1);
        groups[g]->push_back(std::move(buffer));
      }
    }
  }
  char end[8];
  r.bytes(end, sizeof end);
  if (std::memcmp(end, kEndMarker, sizeof end) != 0 || !r.at_end()) {
    throw Error(ErrorKind::IoFailure, path.string() + ": missing end marker");
  }
  return ck;
}

}  // namespace kvqa
