// Command-line front end for the cross-lingual rumour detection pipeline.
//
// Subcommands: synth (generate bilingual corpora), transfer (teacher +
// self-training loop), eval (score a checkpoint), ablate (pretrain x freeze
// grid), sweep (revealed-gold fraction sweep). One run writes one output
// directory with fixed file names; identical arguments and inputs produce
// byte-identical artifacts.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rumour/errors.hpp"
#include "rumour/eval.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rumour;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
  if (!out) throw DataError("failed writing file: " + path.string());
}

fs::path make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory: " + dir);
  return fs::path(dir);
}

SepStyle parse_sep(const std::string& s) {
  return s == "double" ? SepStyle::Double : SepStyle::Single;
}

json metrics_to_json(const Metrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["n"] = m.n;
  j["seed"] = m.seed;
  for (const auto& [cls, s] : m.per_class)
    j["per_class"][label_to_string(cls)] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  return j;
}

// Everything a transfer-style command needs to rebuild its task and config.
struct PipelineArgs {
  std::string source_path;
  std::string target_path;
  std::string out_dir;
  std::size_t vocab_size = 420;
  std::size_t max_seq_len = 384;
  std::string sep = "single";
  int dim = 32;
  int layers = 2;
  std::uint64_t task_seed = 7;

  double p = 0.95;
  int iters = 7;
  bool gl = false;
  bool freeze = true;
  bool adaptive_pretrain = true;
  double gold_fraction = 0.0;
  double gold_weight = 1.0;
  double mask_prob = 0.15;
  std::uint64_t seed = 1;
  double lr = 2e-5;
  int epochs = 3;
  int batch = 16;
  double dropout = 0.1;
  double pretrain_lr = 2e-5;
  int pretrain_epochs = 3;
  int pretrain_batch = 8;

  std::vector<std::uint64_t> seeds{1, 2, 3};
  int parallel = 1;

  void add_task_flags(CLI::App* cmd) {
    cmd->add_option("--source", source_path, "Source-language dataset (JSON Lines)")
        ->required();
    cmd->add_option("--target", target_path, "Target-language dataset (JSON Lines)")
        ->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--vocab-size", vocab_size, "Shared subword vocabulary size");
    cmd->add_option("--max-seq", max_seq_len, "Maximum token sequence length")
        ->check(CLI::Range(std::size_t{8}, std::size_t{1} << 20));
    cmd->add_option("--sep", sep, "Separator style between source and reactions")
        ->check(CLI::IsMember({"single", "double"}));
    cmd->add_option("--dim", dim, "Embedding/encoder width");
    cmd->add_option("--layers", layers, "Encoder layer count");
    cmd->add_option("--task-seed", task_seed, "Split/vocabulary seed");
  }

  void add_transfer_flags(CLI::App* cmd) {
    cmd->add_option("--p", p, "Silver-label confidence threshold");
    cmd->add_option("--iters", iters, "Self-training iterations");
    cmd->add_flag("--gl,!--no-gl", gl, "Mix source gold labels into student training");
    cmd->add_flag("--freeze,!--no-freeze", freeze,
                  "Freeze the embedding table for the initial teacher fine-tune");
    cmd->add_flag("--adaptive-pretrain,!--no-adaptive-pretrain", adaptive_pretrain,
                  "Masked-token pretraining before the teacher fine-tune");
    cmd->add_option("--gold-fraction", gold_fraction,
                    "Fraction of target train gold labels revealed");
    cmd->add_option("--gold-weight", gold_weight, "Duplication factor for injected gold");
    cmd->add_option("--mask-prob", mask_prob, "Pretraining mask probability");
    cmd->add_option("--seed", seed, "Model seed");
    cmd->add_option("--lr", lr, "Fine-tuning learning rate");
    cmd->add_option("--epochs", epochs, "Fine-tuning epochs");
    cmd->add_option("--batch", batch, "Fine-tuning batch size");
    cmd->add_option("--dropout", dropout, "Classifier dropout rate");
    cmd->add_option("--pretrain-lr", pretrain_lr, "Pretraining learning rate");
    cmd->add_option("--pretrain-epochs", pretrain_epochs, "Pretraining epochs");
    cmd->add_option("--pretrain-batch", pretrain_batch, "Pretraining batch size");
  }

  void add_multi_seed_flags(CLI::App* cmd) {
    cmd->add_option("--seeds", seeds, "Model seeds (comma-separated)")
        ->delimiter(',');
    cmd->add_option("--parallel", parallel, "Worker threads for independent runs")
        ->check(CLI::PositiveNumber);
  }

  TransferTask load_task() const {
    auto source_threads = load_jsonl(source_path);
    auto target_threads = load_jsonl(target_path);
    return prepare_task(source_threads, target_threads,
                        fs::path(source_path).stem().string(),
                        fs::path(target_path).stem().string(), vocab_size,
                        max_seq_len, parse_sep(sep), dim, layers, task_seed);
  }

  TransferConfig transfer_config() const {
    TransferConfig cfg;
    cfg.p = p;
    cfg.max_iterations = iters;
    cfg.use_gold_labels = gl;
    cfg.freeze_initial_teacher = freeze;
    cfg.adaptive_pretraining = adaptive_pretrain;
    cfg.target_gold_fraction = gold_fraction;
    cfg.gold_weight = gold_weight;
    cfg.mask_prob = mask_prob;
    cfg.seed = seed;
    cfg.train.learning_rate = lr;
    cfg.train.epochs = epochs;
    cfg.train.batch_size = batch;
    cfg.train.dropout = dropout;
    cfg.pretrain.learning_rate = pretrain_lr;
    cfg.pretrain.epochs = pretrain_epochs;
    cfg.pretrain.batch_size = pretrain_batch;
    cfg.pretrain.dropout = dropout;
    return cfg;
  }

  // Every knob materialized, defaults included, so a run directory is
  // reproducible from its config file alone.
  json resolved_config(const std::string& command) const {
    json j;
    j["command"] = command;
    j["source"] = source_path;
    j["target"] = target_path;
    j["vocab_size"] = vocab_size;
    j["max_seq_len"] = max_seq_len;
    j["sep_style"] = sep;
    j["dim"] = dim;
    j["layers"] = layers;
    j["task_seed"] = task_seed;
    j["p"] = p;
    j["iters"] = iters;
    j["gl"] = gl;
    j["freeze"] = freeze;
    j["adaptive_pretrain"] = adaptive_pretrain;
    j["gold_fraction"] = gold_fraction;
    j["gold_weight"] = gold_weight;
    j["mask_prob"] = mask_prob;
    j["seed"] = seed;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["batch"] = batch;
    j["dropout"] = dropout;
    j["pretrain_lr"] = pretrain_lr;
    j["pretrain_epochs"] = pretrain_epochs;
    j["pretrain_batch"] = pretrain_batch;
    return j;
  }
};

struct SynthArgs {
  SynthConfig cfg = benchmark_synth_config();
  std::string out_dir;
};

struct EvalArgs {
  std::string checkpoint_path;
  std::string vocab_path;
  std::string data_path;
  std::string out_dir;
  std::size_t max_seq_len = 384;
  std::string sep = "single";
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
  auto out = make_out_dir(args.out_dir);
  BilingualCorpus corpus = synth_bilingual(args.cfg);
  save_jsonl(corpus.source, (out / "source.jsonl").string());
  save_jsonl(corpus.target, (out / "target.jsonl").string());

  json manifest;
  manifest["command"] = "synth";
  manifest["n_per_language"] = args.cfg.n_per_language;
  manifest["vocab_size_per_language"] = args.cfg.vocab_size_per_language;
  manifest["lexical_overlap"] = args.cfg.lexical_overlap;
  manifest["label_signal_strength"] = args.cfg.label_signal_strength;
  manifest["reaction_count_min"] = args.cfg.reaction_count_min;
  manifest["reaction_count_max"] = args.cfg.reaction_count_max;
  manifest["seed"] = args.cfg.seed;
  manifest["files"] = {"source.jsonl", "target.jsonl"};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << (out / "source.jsonl").string() << ", "
            << (out / "target.jsonl").string() << "\n";
  return 0;
}

int cmd_transfer(const PipelineArgs& args) {
  auto out = make_out_dir(args.out_dir);
  TransferTask task = args.load_task();
  TransferConfig cfg = args.transfer_config();
  write_text(out / "config.json", args.resolved_config("transfer").dump(2) + "\n");

  TransferResult result =
      run_transfer(task.dims, task.source, task.target, task.vocab, cfg);

  write_text(out / "trajectory.jsonl", trajectory_to_jsonl(result.trajectory));
  write_text(out / "trajectory.csv", trajectory_to_csv(result.trajectory));

  json metrics;
  metrics["best_iteration"] = result.best_iteration;
  metrics["target_test"] =
      metrics_to_json(evaluate_model(result.final_params, task.target.test, cfg.seed));
  metrics["source_test"] =
      metrics_to_json(evaluate_model(result.final_params, task.source.test, cfg.seed));
  write_text(out / "metrics.json", metrics.dump(2) + "\n");

  save_checkpoint(result.final_params, (out / "checkpoint.bin").string());
  save_vocabulary(task.vocab, (out / "vocab.txt").string());
  std::cout << "best iteration " << result.best_iteration << ", target test accuracy "
            << metrics["target_test"]["accuracy"].get<double>() << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  auto out = make_out_dir(args.out_dir);
  ClassifierParams params = load_checkpoint(args.checkpoint_path);
  Vocabulary vocab = load_vocabulary(args.vocab_path);
  auto threads = load_jsonl(args.data_path);

  std::vector<LabeledExample> examples;
  for (const auto& t : threads) {
    if (!t.label) continue;
    examples.push_back(
        {t.id, encode_thread(t, vocab, args.max_seq_len, parse_sep(args.sep)),
         *t.label});
  }
  if (examples.empty())
    throw DataError("no labeled threads in " + args.data_path);

  json config;
  config["command"] = "eval";
  config["checkpoint"] = args.checkpoint_path;
  config["vocab"] = args.vocab_path;
  config["data"] = args.data_path;
  config["max_seq_len"] = args.max_seq_len;
  config["sep_style"] = args.sep;
  config["seed"] = args.seed;
  write_text(out / "config.json", config.dump(2) + "\n");

  Metrics m = evaluate_model(params, examples, args.seed);
  write_text(out / "metrics.json", metrics_to_json(m).dump(2) + "\n");
  std::cout << "accuracy " << m.accuracy << " on " << m.n << " threads\n";
  return 0;
}

int cmd_ablate(const PipelineArgs& args) {
  auto out = make_out_dir(args.out_dir);
  TransferTask task = args.load_task();
  TransferConfig cfg = args.transfer_config();
  json config = args.resolved_config("ablate");
  config["seeds"] = args.seeds;
  config["parallel"] = args.parallel;
  write_text(out / "config.json", config.dump(2) + "\n");

  auto grid = run_ablation(task, args.seeds, cfg, args.parallel);

  std::string jsonl;
  for (const auto& cell : grid) {
    json j;
    j["pretrain"] = cell.pretrain_on ? "on" : "off";
    j["freeze"] = cell.freeze_name;
    j["target_accuracy_mean"] = cell.target_accuracy_mean;
    j["per_seed"] = cell.per_seed;
    j["seeds"] = args.seeds;
    jsonl += j.dump() + "\n";
  }
  write_text(out / "ablation.jsonl", jsonl);
  std::string table = ablation_to_table(grid);
  write_text(out / "ablation.txt", table);
  std::cout << table;
  return 0;
}

int cmd_sweep(const PipelineArgs& args, const std::vector<double>& fractions) {
  auto out = make_out_dir(args.out_dir);
  TransferTask task = args.load_task();
  TransferConfig cfg = args.transfer_config();
  json config = args.resolved_config("sweep");
  config["seeds"] = args.seeds;
  config["parallel"] = args.parallel;
  config["fractions"] = fractions;
  write_text(out / "config.json", config.dump(2) + "\n");

  auto rows = run_semi_supervised_sweep(task, fractions, args.seeds, cfg,
                                        args.parallel);

  std::string jsonl;
  for (const auto& row : rows) {
    json j;
    j["fraction"] = row.fraction;
    j["framework_accuracy_mean"] = row.framework_accuracy_mean;
    j["supervised_accuracy_mean"] = row.supervised_accuracy_mean;
    j["framework_per_seed"] = row.framework_per_seed;
    j["supervised_per_seed"] = row.supervised_per_seed;
    j["seeds"] = args.seeds;
    jsonl += j.dump() + "\n";
  }
  write_text(out / "sweep.jsonl", jsonl);
  std::string table = sweep_to_table(rows);
  write_text(out / "sweep.txt", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual rumour detection via self-training"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic bilingual corpus");
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--n", synth_args.cfg.n_per_language, "Threads per language");
  synth->add_option("--vocab", synth_args.cfg.vocab_size_per_language,
                    "Word lexicon size per language");
  synth->add_option("--overlap", synth_args.cfg.lexical_overlap,
                    "Fraction of word lexicon shared across languages")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--signal", synth_args.cfg.label_signal_strength,
                    "Label signal strength of the generator")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--reactions-min", synth_args.cfg.reaction_count_min,
                    "Minimum reactions per thread");
  synth->add_option("--reactions-max", synth_args.cfg.reaction_count_max,
                    "Maximum reactions per thread");
  synth->add_option("--seed", synth_args.cfg.seed, "Generator seed");

  PipelineArgs transfer_args;
  auto* transfer =
      app.add_subcommand("transfer", "Teacher fine-tune plus self-training loop");
  transfer_args.add_task_flags(transfer);
  transfer_args.add_transfer_flags(transfer);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_args.checkpoint_path, "Model checkpoint")
      ->required();
  eval->add_option("--vocab", eval_args.vocab_path, "Vocabulary file")->required();
  eval->add_option("--data", eval_args.data_path, "Labeled dataset (JSON Lines)")
      ->required();
  eval->add_option("--out", eval_args.out_dir, "Output directory")->required();
  eval->add_option("--max-seq", eval_args.max_seq_len, "Maximum token sequence length")
      ->check(CLI::Range(std::size_t{8}, std::size_t{1} << 20));
  eval->add_option("--sep", eval_args.sep, "Separator style")
      ->check(CLI::IsMember({"single", "double"}));
  eval->add_option("--seed", eval_args.seed, "Seed recorded with the metrics");

  PipelineArgs ablate_args;
  auto* ablate =
      app.add_subcommand("ablate", "Pretraining x freezing grid, zero-shot accuracy");
  ablate_args.add_task_flags(ablate);
  ablate_args.add_transfer_flags(ablate);
  ablate_args.add_multi_seed_flags(ablate);

  PipelineArgs sweep_args;
  std::vector<double> fractions{0.0, 0.2, 0.4, 0.6, 0.8};
  auto* sweep =
      app.add_subcommand("sweep", "Revealed-gold fraction sweep vs supervised baseline");
  sweep_args.add_task_flags(sweep);
  sweep_args.add_transfer_flags(sweep);
  sweep_args.add_multi_seed_flags(sweep);
  sweep->add_option("--fractions", fractions,
                    "Target gold fractions (comma-separated, ascending)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (transfer->parsed()) return cmd_transfer(transfer_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    return cmd_sweep(sweep_args, fractions);
  } catch (const DataError& e) {
    std::cerr << stage << ": data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << stage << ": data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << stage << ": training failure: " << e.what() << "\n";
    return 3;
  }
}
