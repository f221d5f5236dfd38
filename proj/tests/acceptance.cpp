// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "kvqa/error.hpp"
#include "kvqa/eval.hpp"
#include "kvqa/model.hpp"
#include "kvqa/text_encoder.hpp"
#include "support.hpp"

using namespace kvqa;
using kvqa::testing::fixture_config;
using kvqa::testing::FixtureKnowledgeServer;
using kvqa::testing::fixture_dir;
using kvqa::testing::relative_error;
using kvqa::testing::simulate_selection;
using kvqa::testing::slurp;
using kvqa::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, value);
  return buf;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

SelectionConfig budget(std::size_t b, SelectionMode mode) {
  SelectionConfig c;
  c.unmatched_budget = b;
  c.mode = mode;
  return c;
}

Outcome selection_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1709);
  const std::vector<std::string> pool = {"dog", "cat", "cake", "knife", "table", "sky", "snow", "skis",
                                         "tree", "car", "person", "umbrella", "boat", "pizza"};
  const std::size_t instances = 5000;
  std::size_t mismatches = 0;
  for (std::size_t n = 0; n < instances; ++n) {
    std::vector<std::string> labels(rng() % 21);
    for (auto& l : labels) l = pool[rng() % pool.size()];
    TokenSequence q(rng() % 9);
    for (auto& w : q) w = pool[rng() % pool.size()];
    const std::size_t b = rng() % 13;
    const auto mode = static_cast<SelectionMode>(n % 3);
    if (select_knowledge_targets(labels, q, budget(b, mode)) != simulate_selection(labels, q, b, mode)) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches, " +
              fmt("%.2f s", secs)};
}

Outcome matched_exemption() {
  std::size_t cases = 0;
  std::size_t failures = 0;
  for (std::size_t n = 0; n <= 6; ++n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("label" + std::to_string(i));
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      TokenSequence question = {"what", "is", "here"};
      std::vector<std::string> matched;
      std::vector<std::string> unmatched;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          question.push_back(labels[i]);
          matched.push_back(labels[i]);
        } else {
          unmatched.push_back(labels[i]);
        }
      }
      for (std::size_t b = 0; b <= 7; ++b) {
        ++cases;
        const auto out = select_knowledge_targets(labels, question, budget(b, SelectionMode::CoAttention));
        const std::size_t keep = std::min(b, unmatched.size());
        const std::set<std::string> kept_unmatched(unmatched.begin(), unmatched.begin() + static_cast<long>(keep));
        std::vector<std::string> expected;
        for (const auto& l : labels) {
          const bool is_matched = std::find(matched.begin(), matched.end(), l) != matched.end();
          if (is_matched || kept_unmatched.count(l)) expected.push_back(l);
        }
        std::size_t got_matched = 0;
        std::size_t got_unmatched = 0;
        for (const auto& l : out) {
          (std::find(matched.begin(), matched.end(), l) != matched.end() ? got_matched : got_unmatched)++;
        }
        if (out != expected || got_matched != matched.size() || got_unmatched != keep) ++failures;
      }
    }
  }
  return {failures == 0, std::to_string(cases) + " cases, " + std::to_string(failures) + " failures"};
}

// Central differences over every parameter exposed by the callbacks.
struct GradientProbe {
  double step = 1e-5;
  double worst = 0.0;
  template <class F>
  void check(double* value, double analytic, F&& objective) {
    const double saved = *value;
    *value = saved + step;
    const double up = objective();
    *value = saved - step;
    const double down = objective();
    *value = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * step)));
  }
};

double lstm_worst(std::size_t trials) {
  GradientProbe probe;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(300 + t);
    const std::size_t h = 3 + t % 3;
    LstmParams p = LstmParams::random(4, h, 400 + t);
    Eigen::MatrixXd inputs(4, static_cast<Eigen::Index>(1 + t % 4));
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) inputs.col(j) = random_vector(4, rng);
    const Eigen::VectorXd w = random_vector(static_cast<Eigen::Index>(h), rng);
    auto g = LstmGrads::zeros_like(p);
    const auto d_in = lstm_backward(lstm_forward(inputs, p), p, w, g);
    auto f = [&] { return w.dot(lstm_encode(inputs, p).vector); };
    for (Eigen::Index i = 0; i < p.w_input.size(); ++i) probe.check(p.w_input.data() + i, g.w_input.data()[i], f);
    for (Eigen::Index i = 0; i < p.w_hidden.size(); ++i) probe.check(p.w_hidden.data() + i, g.w_hidden.data()[i], f);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i) probe.check(p.bias.data() + i, g.bias.data()[i], f);
    for (Eigen::Index i = 0; i < inputs.size(); ++i) probe.check(inputs.data() + i, d_in.data()[i], f);
  }
  return probe.worst;
}

double mlp_worst(std::size_t trials) {
  GradientProbe probe;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(500 + t);
    MlpParams p = MlpParams::random(6, {5, 4, 3}, 4, 0.5, 600 + t);
    Eigen::VectorXd x = random_vector(6, rng, 2.0);
    const auto y = one_hot(t % 4, 4);
    const bool train_mode = t % 2 == 1;
    const std::uint64_t seed = 700 + t;
    auto g = MlpGrads::zeros_like(p);
    const auto dx = mlp_backward(mlp_forward(x, p, train_mode, seed), p, y, g);
    auto f = [&] { return loss(y, {mlp_forward(x, p, train_mode, seed).probabilities}); };
    for (std::size_t l = 0; l < p.hidden.size(); ++l) {
      for (Eigen::Index i = 0; i < p.hidden[l].weight.size(); ++i) {
        probe.check(p.hidden[l].weight.data() + i, g.hidden[l].weight.data()[i], f);
      }
      for (Eigen::Index i = 0; i < p.hidden[l].bias.size(); ++i) {
        probe.check(p.hidden[l].bias.data() + i, g.hidden[l].bias.data()[i], f);
      }
    }
    for (Eigen::Index i = 0; i < p.output.weight.size(); ++i) {
      probe.check(p.output.weight.data() + i, g.output.weight.data()[i], f);
    }
    for (Eigen::Index i = 0; i < p.output.bias.size(); ++i) probe.check(p.output.bias.data() + i, g.output.bias.data()[i], f);
    for (Eigen::Index i = 0; i < x.size(); ++i) probe.check(x.data() + i, dx[i], f);
  }
  return probe.worst;
}

double end_to_end_worst(std::size_t trials) {
  GradientProbe probe;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(800 + t);
    ModelConfig c;
    c.image_dim = 4;
    c.knowledge_dim = 3;
    c.embed_dim = 3;
    c.question_dim = 3;
    c.hidden = {5, 4, 4};
    c.classes = 4;
    c.dropout = 0.5;
    VqaModel model = VqaModel::init(c, 900 + t);
    ExampleFeatures ex;
    ex.image = random_vector(4, rng);
    ex.knowledge = random_vector(3, rng);
    ex.question = Eigen::MatrixXd(3, static_cast<Eigen::Index>(1 + t % 4));
    for (Eigen::Index j = 0; j < ex.question.cols(); ++j) ex.question.col(j) = random_vector(3, rng);
    ex.target = t % c.classes;
    const auto y = one_hot(*ex.target, c.classes);
    const std::uint64_t seed = 1000 + t;
    ModelGrads g = ModelGrads::zeros_like(model);
    accumulate_gradients(model, ex, y, true, seed, g);
    ModelGrads scratch = ModelGrads::zeros_like(model);
    auto f = [&] { return accumulate_gradients(model, ex, y, true, seed, scratch); };
    for (const auto& slot : parameter_slots(model, g)) {
      for (std::size_t i = 0; i < slot.size(); ++i) probe.check(slot.value + i, slot.grad[i], f);
    }
  }
  return probe.worst;
}

Outcome gradient_checks() {
  const std::size_t trials = 5;
  const double lstm = lstm_worst(trials);
  const double mlp = mlp_worst(trials);
  const double e2e = end_to_end_worst(trials);
  return {lstm <= 1e-4 && mlp <= 1e-4 && e2e <= 1e-4,
          "max relative error: lstm " + fmt("%.2e", lstm) + ", mlp " + fmt("%.2e", mlp) + ", end-to-end " +
              fmt("%.2e", e2e) + " (" + std::to_string(trials) + " points each)"};
}

Outcome loss_calibration() {
  bool ok = true;
  std::string detail;
  for (std::size_t k : {2, 15, 1000}) {
    const double value = loss(one_hot(k / 2, k), {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / k)});
    ok = ok && std::abs(value - std::log(static_cast<double>(k))) <= 1e-9;
    detail += (detail.empty() ? "" : ", ") + ("K=" + std::to_string(k) + ": " + fmt("%.6f", value));
  }
  return {ok, detail};
}

Outcome softmax_properties() {
  std::mt19937_64 rng(11);
  double worst_sum = 0.0;
  double worst_shift = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto z = random_vector(1 + t % 40, rng, t % 2 ? 50.0 : 3.0);
    const auto p = softmax(z);
    worst_sum = std::max(worst_sum, std::abs(p.sum() - 1.0));
    for (double c : {-1000.0, -3.5, 0.25, 7.0, 1000.0}) {
      const Eigen::VectorXd shifted = (z.array() + c).matrix();
      worst_shift = std::max(worst_shift, (softmax(shifted) - p).cwiseAbs().maxCoeff());
    }
  }
  return {worst_sum <= 1e-9 && worst_shift <= 1e-9,
          "max |sum-1| " + fmt("%.1e", worst_sum) + ", max shift change " + fmt("%.1e", worst_shift)};
}

Outcome amsgrad() {
  double theta = 0.0;
  const double g = 1.0;
  const std::vector<ParamSlot> scalar = {{"w", &theta, &g, 1, 1, false}};
  OptimizerState st;
  st.learning_rate = 0.003;
  amsgrad_step(scalar, st);
  const double update = -theta;
  const bool step_ok = std::abs(update - 9.4868e-3) <= 1e-6;

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> params(9, 0.0);
  std::vector<double> grads(9, 0.0);
  const std::vector<ParamSlot> slots = {{"t", params.data(), grads.data(), 9, 1, false}};
  OptimizerState run;
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(9);
  bool monotone = true;
  for (int s = 0; s < 1000; ++s) {
    const double scale = s % 37 == 0 ? 5.0 : 0.05;
    for (auto& x : grads) x = scale * n(rng);
    amsgrad_step(slots, run);
    monotone = monotone && (run.v_hat[0].array() >= prev.array()).all();
    prev = run.v_hat[0];
  }
  return {step_ok && monotone,
          "update " + fmt("%.7e", update) + ", v_hat monotone over 1000 steps: " + (monotone ? "yes" : "no")};
}

std::vector<EpochMetrics> train_in_memory(const RunConfig& c) {
  cmd_prepare(c);
  cmd_knowledge(c);
  const auto data = load_training_data(c);
  VqaModel model = VqaModel::init(c.model_config(data.vocab.size()), c.seed);
  OptimizerState state;
  return train(model, state, data.train, data.validation, c.train_config());
}

Outcome overfit() {
  const auto start = std::chrono::steady_clock::now();
  TempDir small_dir;
  const auto small = train_in_memory(fixture_config(small_dir.path(), "overfit/config.json"));
  const double small_acc = small.back().train.accuracy;

  TempDir full_dir;
  auto c = fixture_config(full_dir.path());
  c.train_fraction = 0.99;
  c.lstm_hidden = 1024;
  c.mlp_hidden = 1024;
  c.epochs = 10;
  const auto full = train_in_memory(c);
  const double full_acc = full.back().train.accuracy;
  const double first_loss = full.front().train.loss;
  const double last_loss = full.back().train.loss;
  const double secs = seconds_since(start);

  const bool ok = small_acc >= 0.875 && full_acc >= 0.20 && last_loss < first_loss && secs < 120.0;
  return {ok, "8-example train acc " + fmt("%.3f", small_acc) + "; " + std::to_string(full.back().train.count) +
                  "-example train acc " + fmt("%.3f", full_acc) + ", loss " + fmt("%.3f", first_loss) + " -> " +
                  fmt("%.3f", last_loss) + "; " + fmt("%.1f s", secs)};
}

Outcome wups_checks() {
  const auto t = Taxonomy::from_edges(
      {{"animal", "root"}, {"dog", "animal"}, {"cat", "animal"}, {"food", "root"}, {"cake", "food"}});
  const double same = wup_similarity("dog", "dog", t);
  const double sibling = wup_similarity("dog", "cat", t);
  const double weighted = wups_score("dog", {"cat"}, t, 0.9);
  const bool ok = same == 1.0 && sibling == 2.0 / 3.0 && std::abs(weighted - 0.0667) <= 1e-4;
  return {ok, "wup(dog,dog) " + fmt("%.6f", same) + ", wup(dog,cat) " + fmt("%.6f", sibling) + ", WUPS@0.9 " +
                  fmt("%.6f", weighted)};
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

Outcome determinism() {
  TempDir a;
  TempDir b;
  for (const auto* d : {&a, &b}) {
    const auto c = fixture_config(d->path());
    cmd_prepare(c);
    cmd_knowledge(c);
    cmd_train(c);
    cmd_eval(c);
  }
  const auto ta = tree_bytes(a.path());
  const auto tb = tree_bytes(b.path());
  std::size_t differing = 0;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end() || it->second != bytes) ++differing;
  }
  const bool required = ta.count("model.ckpt") && ta.count("knowledge_train.json") &&
                        ta.count("knowledge_validation.json") && ta.count("reports/summary.json");
  return {required && differing == 0 && ta.size() == tb.size(),
          std::to_string(ta.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

Outcome knowledge_format() {
  TempDir dir;
  auto store = LocalKnowledgeStore::load(fixture_dir() / "knowledge_store.json");
  std::vector<KnowledgeTriple> all;
  std::vector<std::int64_t> ids;
  for (const auto& head : {"dog", "umbrella", "cake", "snow", "knife", "table", "skis"}) {
    for (auto t : store.edges(head, 1000)) {
      t.weight.reset();  // not part of the export format
      all.push_back(t);
      ids.push_back(static_cast<std::int64_t>(1000 + ids.size()));
    }
  }
  export_knowledge_records(all, ids, dir / "k.json");
  const auto records = import_knowledge_records(dir / "k.json");
  bool round_trip = records.size() == all.size();
  for (std::size_t i = 0; round_trip && i < records.size(); ++i) {
    round_trip = from_record(records[i]) == all[i] && records[i].know_id == ids[i];
  }
  const auto doc = nlohmann::ordered_json::parse(slurp(dir / "k.json"));
  bool keys_ok = !doc.empty();
  for (const auto& rec : doc) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : rec.items()) keys.push_back(k);
    keys_ok = keys_ok && keys == std::vector<std::string>{"know_id", "uri", "Labels", "Surface", "Relation"};
  }
  const auto umbrella = fetch_edges("umbrella", 11, store);
  const bool shading = std::any_of(umbrella.begin(), umbrella.end(), [](const KnowledgeTriple& t) {
    return t.head == "Umbrella" && t.relation == Relation::UsedFor && t.tail == "shading";
  });
  return {round_trip && keys_ok && shading, std::to_string(all.size()) + " records round-tripped: " +
                                                (round_trip ? "yes" : "no") + ", keys exact: " +
                                                (keys_ok ? "yes" : "no") + ", umbrella UsedFor shading: " +
                                                (shading ? "yes" : "no")};
}

Outcome cache_equivalence() {
  TempDir root;
  FixtureKnowledgeServer server(fixture_dir() / "knowledge_store.json");
  auto online = fixture_config(root / "online");
  online.offline = false;
  online.remote_url = server.url();
  online.paths.knowledge_store.clear();
  online.paths.cache_dir = root / "cache";
  cmd_prepare(online);
  cmd_knowledge(online);
  const std::size_t served = server.requests();

  auto cached = online;
  cached.paths.work_dir = root / "cached";
  cached.remote_url = kvqa::testing::dead_url();
  cmd_prepare(cached);
  cmd_knowledge(cached);

  bool same = true;
  for (const char* f : {"knowledge_train.json", "knowledge_validation.json"}) {
    same = same && slurp(root / "online" / f) == slurp(root / "cached" / f);
  }
  return {same && served > 0, std::to_string(served) + " upstream requests when online; exports identical: " +
                                  (same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"selection-oracle equivalence", selection_oracle},
      {"matched-exemption property", matched_exemption},
      {"gradient checks", gradient_checks},
      {"loss calibration", loss_calibration},
      {"softmax normalization and shift-invariance", softmax_properties},
      {"AMSGrad hand-step and monotone v_hat", amsgrad},
      {"overfit sanity", overfit},
      {"WUPS hand-checks", wups_checks},
      {"determinism", determinism},
      {"knowledge-format fidelity", knowledge_format},
      {"offline/cache equivalence", cache_equivalence},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
