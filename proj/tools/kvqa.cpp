// kvqa: command-line front end for the knowledge-aware VQA pipeline.

#include <cstdint>
#include <iostream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "kvqa/error.hpp"
#include "kvqa/pipeline.hpp"

namespace {

// Flags shared by every subcommand. Anything set here overrides the config file.
struct Overrides {
  std::string config;
  bool offline = false;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> work_dir;
  std::optional<std::string> knowledge_dir;
  std::optional<std::string> checkpoint;
  std::optional<std::string> cache_dir;
  std::optional<std::string> remote_url;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::size_t> budget;
  bool freeze_encoder = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration (JSON)");
  cmd->add_flag("--offline", o.offline, "Use the local knowledge store only");
  cmd->add_option("--mode", o.mode, "Knowledge selection: co_attention, image_only, question_only");
  cmd->add_option("--seed", o.seed, "Seed for the split, initialization and shuffling");
  cmd->add_option("--work-dir", o.work_dir, "Directory for prepared data");
  cmd->add_option("--knowledge-dir", o.knowledge_dir, "Directory for knowledge_{train,validation}.json");
  cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  cmd->add_option("--cache-dir", o.cache_dir, "Knowledge lookup cache");
  cmd->add_option("--knowledge-url", o.remote_url, "Remote knowledge endpoint");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--learning-rate", o.learning_rate, "AMSGrad step size");
  cmd->add_option("--budget", o.budget, "Unmatched labels looked up per question");
  cmd->add_flag("--freeze-encoder", o.freeze_encoder, "Keep the question encoder fixed during training");
}

kvqa::RunConfig resolve(const Overrides& o) {
  kvqa::RunConfig c = o.config.empty() ? kvqa::RunConfig{} : kvqa::load_run_config(o.config);
  if (o.offline) c.offline = true;
  if (o.mode) c.selection.mode = kvqa::parse_selection_mode(*o.mode);
  if (o.seed) c.seed = *o.seed;
  if (o.work_dir) c.paths.work_dir = *o.work_dir;
  if (o.knowledge_dir) c.paths.knowledge_dir = *o.knowledge_dir;
  if (o.checkpoint) c.paths.checkpoint = *o.checkpoint;
  if (o.cache_dir) c.paths.cache_dir = *o.cache_dir;
  if (o.remote_url) c.remote_url = *o.remote_url;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.budget) c.selection.unmatched_budget = *o.budget;
  if (o.freeze_encoder) c.freeze_encoder = true;
  kvqa::validate_numbers(c);
  return c;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question-aware knowledge VQA pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* prepare = app.add_subcommand("prepare", "Normalize inputs, build the answer vocabulary and split");
  auto* knowledge = app.add_subcommand("knowledge", "Select and fetch knowledge for every question");
  auto* train = app.add_subcommand("train", "Train the model and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "Score the checkpoint with accuracy and WUPS");
  auto* answer = app.add_subcommand("answer", "Answer one question about one image");
  for (auto* cmd : {prepare, knowledge, train, eval, answer}) add_common(cmd, o);

  std::int64_t image_id = 0;
  std::string question;
  answer->add_option("--image", image_id, "image_id")->required();
  answer->add_option("--question", question, "Question text")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(o);
    if (prepare->parsed()) {
      const auto s = kvqa::cmd_prepare(cfg);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "questions: " << s.questions << "\nanswer classes: " << s.answer_classes
                << "\nquestion vocabulary: " << s.question_vocab << "\ntrain: " << s.train
                << "\nvalidation: " << s.validation << '\n';
    } else if (knowledge->parsed()) {
      const auto s = kvqa::cmd_knowledge(cfg);
      std::cout << "train records: " << s.train_records << "\nvalidation records: " << s.validation_records
                << '\n';
    } else if (train->parsed()) {
      const auto s = kvqa::cmd_train(cfg);
      for (const auto& m : s.history) {
        std::cout << "epoch " << m.epoch << "  train loss " << fmt(m.train.loss) << " acc " << fmt(m.train.accuracy)
                  << "  val loss " << fmt(m.validation.loss) << " acc " << fmt(m.validation.accuracy) << '\n';
      }
      if (s.excluded) std::cout << s.excluded << " question(s) without an in-vocabulary answer were skipped\n";
      std::cout << "checkpoint: " << cfg.checkpoint().string() << '\n';
    } else if (eval->parsed()) {
      const auto s = kvqa::cmd_eval(cfg);
      for (const auto& r : s.reports) {
        std::cout << r.label << "  n=" << r.rows.size() << "  accuracy " << fmt(r.exact_accuracy);
        for (std::size_t k = 0; k < r.thresholds.size(); ++k) {
          std::cout << "  WUPS@" << r.thresholds[k] << ' ' << fmt(r.wups_at_threshold[k]);
        }
        std::cout << '\n';
      }
    } else if (answer->parsed()) {
      std::cout << kvqa::format_answer(kvqa::cmd_answer(cfg, image_id, question));
    }
  } catch (const kvqa::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
