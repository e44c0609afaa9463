#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rumour/train.hpp"

namespace rumour {

struct LabeledExample {
  std::string thread_id;
  TokenSequence seq;
  Label label = Label::NonRumour;
};

// Training code only ever sees target train data through this view.
struct UnlabeledExample {
  std::string thread_id;
  TokenSequence seq;
};

struct EncodedSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
};

struct SilverExample {
  std::string thread_id;
  TokenSequence seq;
  Label label = Label::NonRumour;  // predicted
  double confidence = 0.0;
  int iteration = 0;
};

struct TransferConfig {
  double p = 0.95;  // confidence threshold
  int max_iterations = 7;
  bool use_gold_labels = false;        // the "+GL" variant
  bool freeze_initial_teacher = true;  // embedding freeze for the first fine-tune
  bool adaptive_pretraining = true;
  double gold_weight = 1.0;      // duplication factor for injected gold, 1 = plain mix
  bool p_decay_on_empty = false;  // lower p by 0.01 after a degenerate iteration
  double target_gold_fraction = 0.0;  // semi-supervised mix; 0 = zero-shot
  double mask_prob = 0.15;
  TrainConfig train;  // fine-tuning phases
  // Masked-token pretraining; smaller default batch than fine-tuning.
  TrainConfig pretrain{2e-5, 3, 8, 0.1, 0, FreezePolicy::none()};
  // Ablation hook: overrides the teacher fine-tune freeze policy when set.
  std::optional<FreezePolicy> teacher_freeze_override;
  std::uint64_t seed = 0;
};

struct IterationRecord {
  int iteration = 0;
  std::size_t silver_before_filter = 0;
  std::size_t silver_after_filter = 0;
  std::size_t silver_after_balance = 0;
  bool degenerate = false;  // empty balanced set, no training performed
  double target_val_accuracy = 0.0;
  std::optional<double> source_val_accuracy;
};

struct TransferResult {
  ClassifierParams final_params;  // best-iteration model
  int best_iteration = 0;
  std::vector<IterationRecord> trajectory;  // iteration 0 = zero-shot entry
};

using IdPrediction = std::pair<std::string, Prediction>;

// Optional masked-token pretraining, then supervised fine-tuning with the
// embedding table frozen when cfg.freeze_initial_teacher is set.
ClassifierParams fit_teacher(ClassifierParams params,
                             const std::vector<LabeledExample>& source_train,
                             const std::vector<TokenSequence>& pretrain_seqs,
                             const Vocabulary& vocab,
                             const TransferConfig& cfg);

// Keeps predictions with confidence >= p, input order preserved.
std::vector<IdPrediction> filter_by_confidence(
    const std::vector<IdPrediction>& preds, double p);

// Keeps the m = min(class counts) highest-confidence examples per class,
// ties by thread id; result size 2m.
std::vector<IdPrediction> balance_classes(
    const std::vector<IdPrediction>& filtered);

struct StepResult {
  ClassifierParams student;
  IterationRecord record;
  std::vector<SilverExample> silver;
};

// One loop turn: predict -> filter -> balance -> train a fresh copy of the
// teacher on the silver set (plus source gold when configured, plus any
// revealed target gold). All parameters update in this phase.
StepResult self_train_step(const ClassifierParams& teacher,
                           const std::vector<UnlabeledExample>& target_unlabeled,
                           const std::vector<LabeledExample>* source_gold,
                           const std::vector<LabeledExample>* target_gold,
                           const TransferConfig& cfg, int iteration);

// Deterministic seeded choice of which target train ids get their gold label
// revealed for the semi-supervised variant.
std::unordered_set<std::string> semi_supervised_reveal(
    double fraction, const std::vector<LabeledExample>& target_train,
    std::uint64_t seed);

// Full pipeline: fit_teacher, then max_iterations self-training steps with
// teacher <- student, tracking validation accuracy; returns the model from
// the best-target-validation iteration.
TransferResult run_transfer(const Dims& dims, const EncodedSplit& source,
                            const EncodedSplit& target, const Vocabulary& vocab,
                            const TransferConfig& cfg);

double accuracy_on(const ClassifierParams& params,
                   const std::vector<LabeledExample>& examples);

}  // namespace rumour
