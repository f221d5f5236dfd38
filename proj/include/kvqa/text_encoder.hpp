#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace kvqa {

inline constexpr std::size_t kMaxTokenLength = 20;
inline constexpr std::size_t kDefaultEmbeddingDim = 300;

/// Lowercase word tokens, each 1..20 characters long.
using TokenSequence = std::vector<std::string>;

/// Lowercases, splits on whitespace, strips punctuation at token edges and
/// truncates each token to 20 characters. Idempotent over its own output.
TokenSequence tokenize(std::string_view text);

/// Word vectors of a fixed width. Unknown words map to the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = kDefaultEmbeddingDim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& word) const { return vectors_.count(word) != 0; }

  /// Keeps the first vector seen for a word; returns false on a duplicate.
  bool insert(const std::string& word, Eigen::VectorXd vector);
  const Eigen::VectorXd& lookup(const std::string& word) const;

 private:
  std::size_t dim_;
  Eigen::VectorXd unk_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
};

/// Reads GloVe-style text: "word v1 ... v_dim" per line.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::size_t dim = kDefaultEmbeddingDim);

/// One column per token.
Eigen::MatrixXd embed_tokens(const TokenSequence& tokens, const EmbeddingTable& table);

/// Single-layer LSTM. Gate rows are stacked as [input; forget; output; candidate].
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Eigen::MatrixXd w_input;   // 4H x input_dim
  Eigen::MatrixXd w_hidden;  // 4H x H
  Eigen::VectorXd bias;      // 4H

  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  /// Uniform in [-1/sqrt(H), 1/sqrt(H)].
  static LstmParams random(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

  bool all_finite() const;
};

struct LstmGrads {
  Eigen::MatrixXd w_input;
  Eigen::MatrixXd w_hidden;
  Eigen::VectorXd bias;

  static LstmGrads zeros_like(const LstmParams& params);
  void set_zero();
};

/// Intermediates of one forward pass, kept for backpropagation.
struct LstmTrace {
  Eigen::MatrixXd inputs;   // input_dim x T
  Eigen::MatrixXd gates;    // 4H x T, post-activation
  Eigen::MatrixXd cells;    // H x (T+1), column 0 is the zero initial state
  Eigen::MatrixXd hiddens;  // H x (T+1)

  std::size_t steps() const { return static_cast<std::size_t>(inputs.cols()); }
  Eigen::VectorXd final_hidden() const { return hiddens.col(hiddens.cols() - 1); }
};

struct QuestionEncoding {
  Eigen::VectorXd vector;  // final hidden state
  TokenSequence tokens;
};

LstmTrace lstm_forward(const Eigen::MatrixXd& inputs, const LstmParams& params);

/// Accumulates dLoss/dparams into grads given dLoss/d(final hidden).
/// Returns dLoss/dinputs (input_dim x T).
Eigen::MatrixXd lstm_backward(const LstmTrace& trace, const LstmParams& params,
                              const Eigen::VectorXd& d_final_hidden, LstmGrads& grads);

/// Final hidden state from a zero initial state; zero vector for no input.
QuestionEncoding lstm_encode(const Eigen::MatrixXd& inputs, const LstmParams& params,
                             TokenSequence tokens = {});

}  // namespace kvqa
