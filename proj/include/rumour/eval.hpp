#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rumour/selftrain.hpp"

namespace rumour {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  std::map<Label, ClassScores> per_class;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

enum class Variant {
  ZeroShot,
  ST,
  ST_GL,
  SupervisedSource,
  SupervisedTarget,
  SupervisedBoth,
};

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& s);

struct ExperimentResult {
  std::string source_name;
  std::string target_name;
  Variant variant = Variant::ZeroShot;
  std::vector<Metrics> target_runs;  // one per seed
  std::vector<Metrics> source_runs;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> errors;  // failed runs surface here, one per failure
  double target_mean = 0.0;
  double target_stddev = 0.0;  // population stddev
  double source_mean = 0.0;
  double source_stddev = 0.0;
};

// A transfer direction with everything encoded and ready to run.
struct TransferTask {
  std::string source_name;
  std::string target_name;
  EncodedSplit source;
  EncodedSplit target;
  Vocabulary vocab;
  Dims dims;
};

// Splits both corpora, trains the shared subword vocabulary on the union of
// the training texts, and encodes every thread.
TransferTask prepare_task(const std::vector<Thread>& source_threads,
                          const std::vector<Thread>& target_threads,
                          const std::string& source_name,
                          const std::string& target_name,
                          std::size_t vocab_size, std::size_t max_seq_len,
                          SepStyle sep_style, int model_dim, int model_layers,
                          std::uint64_t seed);

Metrics compute_metrics(const std::vector<Prediction>& preds,
                        const std::vector<Label>& gold);

Metrics evaluate_model(const ClassifierParams& params,
                       const std::vector<LabeledExample>& examples,
                       std::uint64_t seed);

// Runs every (variant, seed) pair on a task and aggregates mean/stddev.
// parallel > 1 fans the independent (variant, seed) runs across that many
// worker threads; results are identical to the serial order.
std::vector<ExperimentResult> run_matrix(const TransferTask& task,
                                         const std::vector<Variant>& variants,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TransferConfig& base_cfg,
                                         int parallel = 1);

struct AblationCell {
  std::string freeze_name;  // "none", "embeddings", "first_k"
  bool pretrain_on = false;
  double target_accuracy_mean = 0.0;
  std::vector<double> per_seed;
};

// 3 freeze options x 2 pretrain options, zero-shot target accuracy per cell.
std::vector<AblationCell> run_ablation(const TransferTask& task,
                                       const std::vector<std::uint64_t>& seeds,
                                       const TransferConfig& base_cfg,
                                       int parallel = 1);

struct SweepRow {
  double fraction = 0.0;
  double framework_accuracy_mean = 0.0;   // cross-lingual pipeline with revealed gold
  double supervised_accuracy_mean = 0.0;  // same-fraction supervised baseline
  std::vector<double> framework_per_seed;
  std::vector<double> supervised_per_seed;
};

std::vector<SweepRow> run_semi_supervised_sweep(
    const TransferTask& task, const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds, const TransferConfig& base_cfg,
    int parallel = 1);

// Pinned desk-scale benchmark: a synthetic bilingual task small enough to
// train in seconds but hard enough that the transfer trends are measurable.
// Learning rates are scaled up to suit the small model; everything else
// keeps the standard defaults.
SynthConfig benchmark_synth_config();
TransferTask prepare_benchmark_task();
TransferConfig benchmark_transfer_config();
std::vector<std::uint64_t> benchmark_seeds();

// Serialization: one run per line, plus plain-text tables for humans.
std::string results_to_jsonl(const std::vector<ExperimentResult>& results);
std::string results_to_table(const std::vector<ExperimentResult>& results);
std::string ablation_to_table(const std::vector<AblationCell>& grid);
std::string sweep_to_table(const std::vector<SweepRow>& rows);
std::string trajectory_to_jsonl(const std::vector<IterationRecord>& trajectory);
std::string trajectory_to_csv(const std::vector<IterationRecord>& trajectory);

}  // namespace rumour
