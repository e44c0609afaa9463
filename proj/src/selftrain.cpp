#include "rumour/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rumour/errors.hpp"
#include "rumour/rng.hpp"

namespace rumour {

namespace {

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::vector<LabeledSeq> to_training_set(const std::vector<SilverExample>& silver,
                                        const std::vector<LabeledExample>* source_gold,
                                        const std::vector<LabeledExample>* target_gold,
                                        double gold_weight) {
  std::vector<LabeledSeq> data;
  for (const auto& s : silver) data.emplace_back(s.seq, s.label);
  const int gold_copies = std::max(1, static_cast<int>(std::lround(gold_weight)));
  auto add_gold = [&](const std::vector<LabeledExample>* gold) {
    if (!gold) return;
    for (const auto& g : *gold)
      for (int c = 0; c < gold_copies; ++c) data.emplace_back(g.seq, g.label);
  };
  add_gold(source_gold);
  add_gold(target_gold);
  return data;
}

}  // namespace

double accuracy_on(const ClassifierParams& params,
                   const std::vector<LabeledExample>& examples) {
  if (examples.empty()) throw DataError("accuracy_on: empty example set");
  std::size_t correct = 0;
  for (const auto& ex : examples)
    if (predict_one(params, ex.seq).label == ex.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

ClassifierParams fit_teacher(ClassifierParams params,
                             const std::vector<LabeledExample>& source_train,
                             const std::vector<TokenSequence>& pretrain_seqs,
                             const Vocabulary& vocab, const TransferConfig& cfg) {
  if (source_train.empty()) throw TrainError("fit_teacher: empty source training set");
  if (cfg.adaptive_pretraining)
    params = adaptive_pretrain(params, pretrain_seqs, vocab, cfg.pretrain,
                               cfg.mask_prob);
  TrainConfig fine = cfg.train;
  fine.freeze = cfg.teacher_freeze_override
                    ? *cfg.teacher_freeze_override
                    : (cfg.freeze_initial_teacher ? FreezePolicy::embeddings_only()
                                                  : FreezePolicy::none());
  std::vector<LabeledSeq> data;
  for (const auto& ex : source_train) data.emplace_back(ex.seq, ex.label);
  return train_supervised(std::move(params), data, fine);
}

std::vector<IdPrediction> filter_by_confidence(
    const std::vector<IdPrediction>& preds, double p) {
  if (p <= 0.5 || p >= 1.0)
    throw DataError("confidence threshold p must be in (0.5, 1)");
  std::vector<IdPrediction> kept;
  for (const auto& pr : preds)
    if (pr.second.confidence >= p) kept.push_back(pr);
  return kept;
}

std::vector<IdPrediction> balance_classes(
    const std::vector<IdPrediction>& filtered) {
  std::vector<const IdPrediction*> rumour, non_rumour;
  for (const auto& pr : filtered)
    (pr.second.label == Label::Rumour ? rumour : non_rumour).push_back(&pr);
  auto by_confidence = [](const IdPrediction* a, const IdPrediction* b) {
    if (a->second.confidence != b->second.confidence)
      return a->second.confidence > b->second.confidence;
    return a->first < b->first;  // tie by thread id
  };
  std::sort(rumour.begin(), rumour.end(), by_confidence);
  std::sort(non_rumour.begin(), non_rumour.end(), by_confidence);
  const std::size_t m = std::min(rumour.size(), non_rumour.size());

  std::unordered_map<const IdPrediction*, bool> keep;
  for (std::size_t i = 0; i < m; ++i) {
    keep[rumour[i]] = true;
    keep[non_rumour[i]] = true;
  }
  std::vector<IdPrediction> out;  // input order preserved
  for (const auto& pr : filtered)
    if (keep.count(&pr)) out.push_back(pr);
  return out;
}

StepResult self_train_step(const ClassifierParams& teacher,
                           const std::vector<UnlabeledExample>& target_unlabeled,
                           const std::vector<LabeledExample>* source_gold,
                           const std::vector<LabeledExample>* target_gold,
                           const TransferConfig& cfg, int iteration) {
  if (!teacher.all_finite()) throw TrainError("self_train_step: non-finite teacher");

  // Fresh predictions every iteration; silver labels are never accumulated.
  std::vector<IdPrediction> preds;
  preds.reserve(target_unlabeled.size());
  std::unordered_map<std::string, const TokenSequence*> seq_by_id;
  for (const auto& ex : target_unlabeled) {
    preds.emplace_back(ex.thread_id, predict_one(teacher, ex.seq));
    seq_by_id[ex.thread_id] = &ex.seq;
  }

  auto filtered = filter_by_confidence(preds, cfg.p);
  auto balanced = balance_classes(filtered);

  StepResult result{teacher, IterationRecord{}, {}};
  result.record.iteration = iteration;
  result.record.silver_before_filter = preds.size();
  result.record.silver_after_filter = filtered.size();
  result.record.silver_after_balance = balanced.size();

  for (const auto& [id, pred] : balanced)
    result.silver.push_back(
        {id, *seq_by_id.at(id), pred.label, pred.confidence, iteration});

  const bool have_gold = target_gold && !target_gold->empty();
  if (balanced.empty() && !have_gold) {
    result.record.degenerate = true;  // student stays an exact teacher copy
    return result;
  }

  auto data = to_training_set(result.silver,
                              cfg.use_gold_labels ? source_gold : nullptr,
                              target_gold, cfg.gold_weight);
  TrainConfig student_cfg = cfg.train;
  student_cfg.freeze = FreezePolicy::none();  // the loop updates all parameters
  student_cfg.seed = mix64(cfg.train.seed, static_cast<std::uint64_t>(iteration));
  result.student = train_supervised(teacher, data, student_cfg);
  return result;
}

std::unordered_set<std::string> semi_supervised_reveal(
    double fraction, const std::vector<LabeledExample>& target_train,
    std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw DataError("target gold fraction must be in [0, 1]");
  std::vector<std::string> ids;
  ids.reserve(target_train.size());
  for (const auto& ex : target_train) ids.push_back(ex.thread_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(ids);
  const std::size_t n_reveal = static_cast<std::size_t>(
      std::lround(fraction * static_cast<double>(ids.size())));
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_reveal)};
}

TransferResult run_transfer(const Dims& dims, const EncodedSplit& source,
                            const EncodedSplit& target, const Vocabulary& vocab,
                            const TransferConfig& cfg) {
  if (cfg.max_iterations < 1) throw DataError("max_iterations must be >= 1");

  ClassifierParams params = init_params(dims, mix64(cfg.seed, 0x1217ULL));

  // Task-adaptive pretraining text: unlabeled train sequences of both sides.
  std::vector<TokenSequence> pretrain_seqs;
  for (const auto& ex : source.train) pretrain_seqs.push_back(ex.seq);
  for (const auto& ex : target.train) pretrain_seqs.push_back(ex.seq);

  TransferConfig run_cfg = cfg;
  run_cfg.train.seed = mix64(cfg.seed, 0x7e0cULL);
  run_cfg.pretrain.seed = mix64(cfg.seed, 0x91a5ULL);

  // Semi-supervised variant: a seeded subset of target train gold labels is
  // revealed; everything else stays an unlabeled view. Revealed gold joins
  // the teacher fine-tune and every student round.
  auto revealed =
      semi_supervised_reveal(cfg.target_gold_fraction, target.train, mix64(cfg.seed, 0x60dULL));
  std::vector<LabeledExample> target_gold;
  std::vector<UnlabeledExample> target_unlabeled;
  for (const auto& ex : target.train) {
    if (revealed.count(ex.thread_id))
      target_gold.push_back(ex);
    else
      target_unlabeled.push_back({ex.thread_id, ex.seq});
  }

  std::vector<LabeledExample> teacher_train = source.train;
  teacher_train.insert(teacher_train.end(), target_gold.begin(), target_gold.end());
  ClassifierParams teacher =
      fit_teacher(std::move(params), teacher_train, pretrain_seqs, vocab, run_cfg);

  TransferResult result;
  IterationRecord zero;
  zero.iteration = 0;
  zero.target_val_accuracy = accuracy_on(teacher, target.validation);
  zero.source_val_accuracy = accuracy_on(teacher, source.validation);
  result.trajectory.push_back(zero);

  ClassifierParams best = teacher;
  int best_iteration = 0;
  double best_accuracy = zero.target_val_accuracy;
  double p_current = cfg.p;

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    TransferConfig step_cfg = run_cfg;
    step_cfg.p = p_current;
    auto step = self_train_step(teacher, target_unlabeled, &source.train,
                                target_gold.empty() ? nullptr : &target_gold,
                                step_cfg, k);
    teacher = std::move(step.student);  // teacher replacement
    step.record.target_val_accuracy = accuracy_on(teacher, target.validation);
    step.record.source_val_accuracy = accuracy_on(teacher, source.validation);
    result.trajectory.push_back(step.record);
    if (step.record.target_val_accuracy > best_accuracy) {
      best_accuracy = step.record.target_val_accuracy;
      best_iteration = k;
      best = teacher;
    }
    if (step.record.degenerate && cfg.p_decay_on_empty)
      p_current = std::max(0.51, p_current - 0.01);
  }

  result.final_params = std::move(best);
  result.best_iteration = best_iteration;
  return result;
}

}  // namespace rumour
