#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "rumour/errors.hpp"
#include "rumour/eval.hpp"
#include "rumour/rng.hpp"
#include "rumour/selftrain.hpp"

using namespace rumour;

namespace {

Prediction make_pred(Label label, double confidence) {
  Prediction p;
  p.label = label;
  p.confidence = confidence;
  p.probs = label == Label::Rumour ? std::array<double, 2>{1.0 - confidence, confidence}
                                   : std::array<double, 2>{confidence, 1.0 - confidence};
  return p;
}

// Exhaustive reference: the max-total-confidence subset with equal class
// counts of size 2m, where m = min(class counts).
std::set<std::string> balance_oracle(const std::vector<IdPrediction>& preds) {
  std::size_t rumour = 0, non = 0;
  for (const auto& pr : preds)
    (pr.second.label == Label::Rumour ? rumour : non) += 1;
  const std::size_t m = std::min(rumour, non);
  std::set<std::string> best;
  double best_total = -1.0;
  const std::size_t n = preds.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t r = 0, s = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      (preds[i].second.label == Label::Rumour ? r : s) += 1;
      total += preds[i].second.confidence;
    }
    if (r != m || s != m) continue;
    if (total > best_total) {
      best_total = total;
      best.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) best.insert(preds[i].first);
    }
  }
  return best;
}

TokenSequence make_seq(const std::vector<int>& body, int pad_to = 16) {
  TokenSequence seq;
  seq.ids.push_back(0);
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  seq.ids.push_back(1);
  seq.attention_len = static_cast<int>(seq.ids.size());
  seq.segment_boundaries = {seq.attention_len - 1};
  seq.ids.resize(static_cast<std::size_t>(pad_to), 2);
  return seq;
}

TransferTask small_task(double overlap, double signal, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_per_language = 200;
  cfg.vocab_size_per_language = 30;
  cfg.lexical_overlap = overlap;
  cfg.label_signal_strength = signal;
  cfg.seed = seed;
  auto corpus = synth_bilingual(cfg);
  return prepare_task(corpus.source, corpus.target, "a", "b", 100, 64,
                      SepStyle::Single, 16, 1, 5);
}

TransferConfig small_config() {
  TransferConfig cfg;
  cfg.max_iterations = 2;
  cfg.train.learning_rate = 5e-3;
  cfg.train.epochs = 2;
  cfg.pretrain.learning_rate = 3e-3;
  cfg.pretrain.epochs = 1;
  return cfg;
}

}  // namespace

TEST_CASE("filter_by_confidence equals naive thresholding") {
  std::vector<IdPrediction> preds{
      {"a", make_pred(Label::Rumour, 0.97)},
      {"b", make_pred(Label::NonRumour, 0.95)},
      {"c", make_pred(Label::Rumour, 0.80)},
  };
  auto kept = filter_by_confidence(preds, 0.95);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].first == "a");
  CHECK(kept[1].first == "b");

  CHECK(filter_by_confidence(preds, 0.999).empty());
  // Idempotent: filtering twice equals once.
  auto twice = filter_by_confidence(kept, 0.95);
  CHECK(twice.size() == kept.size());

  CHECK_THROWS_AS(filter_by_confidence(preds, 0.5), DataError);
  CHECK_THROWS_AS(filter_by_confidence(preds, 1.0), DataError);

  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<IdPrediction> sample;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i)
      sample.emplace_back("t" + std::to_string(i),
                          make_pred(rng.bernoulli(0.5) ? Label::Rumour : Label::NonRumour,
                                    rng.uniform(0.5, 1.0)));
    const double p = rng.uniform(0.55, 0.95);
    auto filtered = filter_by_confidence(sample, p);
    std::vector<std::string> naive;
    for (const auto& pr : sample)
      if (pr.second.confidence >= p) naive.push_back(pr.first);
    REQUIRE(filtered.size() == naive.size());
    for (std::size_t i = 0; i < naive.size(); ++i)
      CHECK(filtered[i].first == naive[i]);  // order preserved
  }
}

TEST_CASE("balance_classes matches the exhaustive oracle") {
  // The stated example: three Rumour, one NonRumour, keep best of each.
  std::vector<IdPrediction> preds{
      {"r1", make_pred(Label::Rumour, 0.99)},
      {"r2", make_pred(Label::Rumour, 0.97)},
      {"r3", make_pred(Label::Rumour, 0.96)},
      {"n1", make_pred(Label::NonRumour, 0.98)},
  };
  auto balanced = balance_classes(preds);
  REQUIRE(balanced.size() == 2);
  CHECK(balanced[0].first == "r1");
  CHECK(balanced[1].first == "n1");

  CHECK(balance_classes({{"r1", make_pred(Label::Rumour, 0.9)}}).empty());
  CHECK(balance_classes({}).empty());

  Rng rng(29);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<IdPrediction> sample;
    const std::size_t n = rng.below(13);
    for (std::size_t i = 0; i < n; ++i)
      sample.emplace_back("t" + std::to_string(i),
                          make_pred(rng.bernoulli(0.5) ? Label::Rumour : Label::NonRumour,
                                    rng.uniform(0.5, 1.0)));
    auto result = balance_classes(sample);
    std::set<std::string> kept;
    std::size_t rumours = 0;
    for (const auto& pr : result) {
      kept.insert(pr.first);
      if (pr.second.label == Label::Rumour) ++rumours;
    }
    CHECK(rumours * 2 == result.size());  // exactly balanced
    CHECK(kept == balance_oracle(sample));

    // Result preserves the input order.
    std::vector<std::string> order;
    for (const auto& pr : sample)
      if (kept.count(pr.first)) order.push_back(pr.first);
    REQUIRE(order.size() == result.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      CHECK(result[i].first == order[i]);
  }
}

TEST_CASE("self_train_step degenerates to a teacher copy when nothing passes") {
  ClassifierParams teacher = init_params({20, 4, 1}, 3);
  std::fill(teacher.cls_w.begin(), teacher.cls_w.end(), 0.0);
  teacher.cls_b = {0.0, 0.0};  // every prediction has confidence 0.5

  std::vector<UnlabeledExample> unlabeled;
  for (int i = 0; i < 6; ++i)
    unlabeled.push_back({"u" + std::to_string(i), make_seq({5 + i})});

  TransferConfig cfg;
  cfg.p = 0.95;
  auto step = self_train_step(teacher, unlabeled, nullptr, nullptr, cfg, 1);
  CHECK(step.record.degenerate);
  CHECK(step.record.silver_before_filter == 6);
  CHECK(step.record.silver_after_filter == 0);
  CHECK(step.record.silver_after_balance == 0);
  CHECK(step.silver.empty());
  CHECK(step.student.content_hash() == teacher.content_hash());
}

TEST_CASE("self_train_step records balanced counts and confident silver") {
  ClassifierParams teacher = init_params({20, 4, 1}, 8);
  std::vector<UnlabeledExample> unlabeled;
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    std::vector<int> body;
    for (int j = 0; j < 4; ++j) body.push_back(5 + static_cast<int>(rng.below(15)));
    unlabeled.push_back({"u" + std::to_string(i), make_seq(body)});
  }

  TransferConfig cfg;
  cfg.p = 0.51;  // random params produce mid confidences
  cfg.train.learning_rate = 1e-3;
  cfg.train.epochs = 1;
  auto step = self_train_step(teacher, unlabeled, nullptr, nullptr, cfg, 2);
  CHECK(step.record.iteration == 2);
  CHECK(step.record.silver_after_balance % 2 == 0);
  CHECK(step.record.silver_after_balance <= step.record.silver_after_filter);
  CHECK(step.record.silver_after_filter <= step.record.silver_before_filter);
  CHECK(step.silver.size() == step.record.silver_after_balance);
  for (const auto& s : step.silver) {
    CHECK(s.confidence >= cfg.p);
    CHECK(s.iteration == 2);
    CHECK(predict_one(teacher, s.seq).label == s.label);
  }
  if (!step.silver.empty())
    CHECK(step.student.content_hash() != teacher.content_hash());
}

TEST_CASE("semi_supervised_reveal is a seeded deterministic subset") {
  std::vector<LabeledExample> train;
  for (int i = 0; i < 10; ++i)
    train.push_back({"t" + std::to_string(i), make_seq({5}), Label::Rumour});

  CHECK_THROWS_AS(semi_supervised_reveal(-0.1, train, 1), DataError);
  CHECK_THROWS_AS(semi_supervised_reveal(1.1, train, 1), DataError);
  CHECK(semi_supervised_reveal(0.0, train, 1).empty());
  CHECK(semi_supervised_reveal(1.0, train, 1).size() == 10);

  auto a = semi_supervised_reveal(0.5, train, 7);
  auto b = semi_supervised_reveal(0.5, train, 7);
  auto c = semi_supervised_reveal(0.5, train, 8);
  CHECK(a.size() == 5);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& id : a)
    CHECK(std::any_of(train.begin(), train.end(),
                      [&](const LabeledExample& ex) { return ex.thread_id == id; }));
}

TEST_CASE("fit_teacher and accuracy_on reject empty inputs") {
  TransferTask task = small_task(0.3, 0.9, 3);
  TransferConfig cfg = small_config();
  CHECK_THROWS_AS(fit_teacher(init_params(task.dims, 1), {}, {}, task.vocab, cfg),
                  TrainError);
  CHECK_THROWS_AS(accuracy_on(init_params(task.dims, 1), {}), DataError);
}

TEST_CASE("teacher separates a fully deterministic source language") {
  TransferTask task = small_task(0.3, 1.0, 3);
  TransferConfig cfg = small_config();
  cfg.adaptive_pretraining = false;
  cfg.train.epochs = 10;
  cfg.train.seed = 11;
  ClassifierParams teacher =
      fit_teacher(init_params(task.dims, 1), task.source.train, {}, task.vocab, cfg);
  CHECK(accuracy_on(teacher, task.source.validation) >= 0.95);
}

TEST_CASE("run_transfer validates, records, and reproduces") {
  TransferTask task = small_task(0.3, 0.9, 3);
  TransferConfig cfg = small_config();
  cfg.seed = 1;

  TransferConfig bad = cfg;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(run_transfer(task.dims, task.source, task.target, task.vocab, bad),
                  DataError);

  auto a = run_transfer(task.dims, task.source, task.target, task.vocab, cfg);
  REQUIRE(a.trajectory.size() == static_cast<std::size_t>(cfg.max_iterations) + 1);
  CHECK(a.trajectory[0].iteration == 0);
  CHECK(a.best_iteration >= 0);
  CHECK(a.best_iteration <= cfg.max_iterations);
  for (const auto& rec : a.trajectory) {
    CHECK(rec.target_val_accuracy >= 0.0);
    CHECK(rec.target_val_accuracy <= 1.0);
    CHECK(rec.silver_after_balance % 2 == 0);
  }

  auto b = run_transfer(task.dims, task.source, task.target, task.vocab, cfg);
  CHECK(a.final_params.content_hash() == b.final_params.content_hash());
  CHECK(a.best_iteration == b.best_iteration);
}

TEST_CASE("zero-shot training never reads target train labels") {
  TransferTask task = small_task(0.3, 0.9, 3);
  TransferConfig cfg = small_config();
  cfg.seed = 2;
  auto clean = run_transfer(task.dims, task.source, task.target, task.vocab, cfg);

  TransferTask poisoned = task;
  for (auto& ex : poisoned.target.train)
    ex.label = ex.label == Label::Rumour ? Label::NonRumour : Label::Rumour;
  auto dirty =
      run_transfer(poisoned.dims, poisoned.source, poisoned.target, poisoned.vocab, cfg);
  CHECK(clean.final_params.content_hash() == dirty.final_params.content_hash());
  for (std::size_t i = 0; i < clean.trajectory.size(); ++i)
    CHECK(clean.trajectory[i].target_val_accuracy ==
          dirty.trajectory[i].target_val_accuracy);
}

TEST_CASE("embedding freeze helps zero-shot transfer between disjoint lexicons") {
  TransferTask task = small_task(0.0, 0.9, 6);
  TransferConfig cfg = small_config();
  cfg.train.epochs = 3;
  cfg.pretrain.epochs = 3;

  std::vector<TokenSequence> pretrain_seqs;
  for (const auto& ex : task.source.train) pretrain_seqs.push_back(ex.seq);
  for (const auto& ex : task.target.train) pretrain_seqs.push_back(ex.seq);

  double frozen_sum = 0.0, open_sum = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    cfg.train.seed = seed + 100;
    cfg.pretrain.seed = seed + 200;
    cfg.freeze_initial_teacher = true;
    frozen_sum += accuracy_on(fit_teacher(init_params(task.dims, seed),
                                          task.source.train, pretrain_seqs,
                                          task.vocab, cfg),
                              task.target.test);
    cfg.freeze_initial_teacher = false;
    open_sum += accuracy_on(fit_teacher(init_params(task.dims, seed),
                                        task.source.train, pretrain_seqs,
                                        task.vocab, cfg),
                            task.target.test);
  }
  CHECK(frozen_sum > open_sum);  // 3-seed means
}
