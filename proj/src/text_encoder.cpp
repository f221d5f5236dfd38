#include "kvqa/text_encoder.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "io.hpp"
#include "kvqa/error.hpp"

namespace kvqa {

namespace {

bool is_edge_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

void strip_edges(std::string& tok) {
  std::size_t begin = 0;
  std::size_t end = tok.size();
  while (begin < end && is_edge_punct(tok[begin])) ++begin;
  while (end > begin && is_edge_punct(tok[end - 1])) --end;
  tok = tok.substr(begin, end - begin);
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string tok = detail::to_lower(std::string(text.substr(i, j - i)));
      strip_edges(tok);
      if (tok.size() > kMaxTokenLength) {
        tok.resize(kMaxTokenLength);
        // Truncation can expose punctuation at the new edge.
        strip_edges(tok);
      }
      if (!tok.empty()) tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), unk_(Eigen::VectorXd::Zero(dim)) {}

bool EmbeddingTable::insert(const std::string& word, Eigen::VectorXd vector) {
  if (static_cast<std::size_t>(vector.size()) != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "vector for '" + word + "' has length " +
                                                  std::to_string(vector.size()) + ", expected " +
                                                  std::to_string(dim_));
  }
  return vectors_.emplace(word, std::move(vector)).second;
}

const Eigen::VectorXd& EmbeddingTable::lookup(const std::string& word) const {
  auto it = vectors_.find(word);
  return it == vectors_.end() ? unk_ : it->second;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  const std::string text = detail::read_text(path);
  EmbeddingTable table(dim);
  std::vector<double> values;
  values.reserve(dim);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t cur = 0;
    auto skip_space = [&] {
      while (cur < line.size() && (line[cur] == ' ' || line[cur] == '\t')) ++cur;
    };
    skip_space();
    if (cur == line.size()) continue;
    std::size_t word_end = cur;
    while (word_end < line.size() && line[word_end] != ' ' && line[word_end] != '\t') ++word_end;
    std::string word(line.substr(cur, word_end - cur));
    cur = word_end;

    values.clear();
    while (true) {
      skip_space();
      if (cur == line.size()) break;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(line.data() + cur, line.data() + line.size(), v);
      if (ec != std::errc()) {
        throw Error(ErrorKind::MalformedRecord,
                    path.string() + " line " + std::to_string(line_no) + ": bad number");
      }
      values.push_back(v);
      cur = static_cast<std::size_t>(ptr - line.data());
    }
    if (values.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, path.string() + " line " + std::to_string(line_no) +
                                                    ": " + std::to_string(values.size()) +
                                                    " values, expected " + std::to_string(dim));
    }
    table.insert(word, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim)));
  }
  return table;
}

Eigen::MatrixXd embed_tokens(const TokenSequence& tokens, const EmbeddingTable& table) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(table.dim()), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    out.col(static_cast<Eigen::Index>(t)) = table.lookup(tokens[t]);
  }
  return out;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const auto rows = static_cast<Eigen::Index>(4 * hidden_dim);
  p.w_input = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(input_dim));
  p.w_hidden = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(hidden_dim));
  p.bias = Eigen::VectorXd::Zero(rows);
  return p;
}

LstmParams LstmParams::random(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  LstmParams p = zeros(input_dim, hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  std::mt19937_64 rng(seed);
  // Scale raw 53-bit draws by hand; uniform_real_distribution is not portable.
  auto draw = [&] { return bound * (2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0); };
  for (Eigen::Index i = 0; i < p.w_input.size(); ++i) p.w_input.data()[i] = draw();
  for (Eigen::Index i = 0; i < p.w_hidden.size(); ++i) p.w_hidden.data()[i] = draw();
  for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias[i] = draw();
  return p;
}

bool LstmParams::all_finite() const {
  return w_input.allFinite() && w_hidden.allFinite() && bias.allFinite();
}

LstmGrads LstmGrads::zeros_like(const LstmParams& params) {
  LstmGrads g;
  g.w_input = Eigen::MatrixXd::Zero(params.w_input.rows(), params.w_input.cols());
  g.w_hidden = Eigen::MatrixXd::Zero(params.w_hidden.rows(), params.w_hidden.cols());
  g.bias = Eigen::VectorXd::Zero(params.bias.size());
  return g;
}

void LstmGrads::set_zero() {
  w_input.setZero();
  w_hidden.setZero();
  bias.setZero();
}

LstmTrace lstm_forward(const Eigen::MatrixXd& inputs, const LstmParams& params) {
  if (inputs.cols() > 0 && static_cast<std::size_t>(inputs.rows()) != params.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "LSTM input has " + std::to_string(inputs.rows()) +
                                                  " rows, expected " +
                                                  std::to_string(params.input_dim));
  }
  const auto H = static_cast<Eigen::Index>(params.hidden_dim);
  const Eigen::Index T = inputs.cols();

  LstmTrace tr;
  tr.inputs = inputs.cols() > 0 ? inputs : Eigen::MatrixXd(static_cast<Eigen::Index>(params.input_dim), 0);
  tr.gates.resize(4 * H, T);
  tr.cells = Eigen::MatrixXd::Zero(H, T + 1);
  tr.hiddens = Eigen::MatrixXd::Zero(H, T + 1);
  if (T == 0) return tr;

  // Input projections for every step in one product.
  Eigen::MatrixXd pre = params.w_input * inputs;
  pre.colwise() += params.bias;
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd a = pre.col(t) + params.w_hidden * tr.hiddens.col(t);
    Eigen::ArrayXd i = sigmoid(a.segment(0, H).array());
    Eigen::ArrayXd f = sigmoid(a.segment(H, H).array());
    Eigen::ArrayXd o = sigmoid(a.segment(2 * H, H).array());
    Eigen::ArrayXd g = a.segment(3 * H, H).array().tanh();
    tr.gates.col(t) << i.matrix(), f.matrix(), o.matrix(), g.matrix();
    tr.cells.col(t + 1) = (f * tr.cells.col(t).array() + i * g).matrix();
    tr.hiddens.col(t + 1) = (o * tr.cells.col(t + 1).array().tanh()).matrix();
  }
  return tr;
}

Eigen::MatrixXd lstm_backward(const LstmTrace& trace, const LstmParams& params,
                              const Eigen::VectorXd& d_final_hidden, LstmGrads& grads) {
  const auto H = static_cast<Eigen::Index>(params.hidden_dim);
  const Eigen::Index T = trace.inputs.cols();
  if (T == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(params.input_dim), 0);

  Eigen::MatrixXd d_pre(4 * H, T);
  Eigen::ArrayXd dh = d_final_hidden.array();
  Eigen::ArrayXd dc = Eigen::ArrayXd::Zero(H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto gates = trace.gates.col(t).array();
    const Eigen::ArrayXd i = gates.segment(0, H);
    const Eigen::ArrayXd f = gates.segment(H, H);
    const Eigen::ArrayXd o = gates.segment(2 * H, H);
    const Eigen::ArrayXd g = gates.segment(3 * H, H);
    const Eigen::ArrayXd c = trace.cells.col(t + 1).array();
    const Eigen::ArrayXd c_prev = trace.cells.col(t).array();
    const Eigen::ArrayXd tanh_c = c.tanh();

    const Eigen::ArrayXd d_o = dh * tanh_c;
    dc += dh * o * (1.0 - tanh_c.square());
    const Eigen::ArrayXd d_i = dc * g;
    const Eigen::ArrayXd d_g = dc * i;
    const Eigen::ArrayXd d_f = dc * c_prev;

    d_pre.col(t) << (d_i * i * (1.0 - i)).matrix(), (d_f * f * (1.0 - f)).matrix(),
        (d_o * o * (1.0 - o)).matrix(), (d_g * (1.0 - g.square())).matrix();
    dh = (params.w_hidden.transpose() * d_pre.col(t)).array();
    dc = dc * f;
  }
  grads.w_input.noalias() += d_pre * trace.inputs.transpose();
  grads.w_hidden.noalias() += d_pre * trace.hiddens.leftCols(T).transpose();
  grads.bias += d_pre.rowwise().sum();
  return params.w_input.transpose() * d_pre;
}

QuestionEncoding lstm_encode(const Eigen::MatrixXd& inputs, const LstmParams& params,
                             TokenSequence tokens) {
  LstmTrace tr = lstm_forward(inputs, params);
  return QuestionEncoding{tr.final_hidden(), std::move(tokens)};
}

}  // namespace kvqa
