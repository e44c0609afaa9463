#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rumour/errors.hpp"
#include "rumour/eval.hpp"
#include "rumour/rng.hpp"

using namespace rumour;

namespace {

Prediction pred_of(Label label) {
  Prediction p;
  p.label = label;
  p.confidence = 0.9;
  p.probs = label == Label::Rumour ? std::array<double, 2>{0.1, 0.9}
                                   : std::array<double, 2>{0.9, 0.1};
  return p;
}

// Independent recount used as the metrics oracle.
Metrics naive_metrics(const std::vector<Prediction>& preds,
                      const std::vector<Label>& gold) {
  Metrics m;
  m.n = preds.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == gold[i]) ++correct;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  for (Label cls : {Label::NonRumour, Label::Rumour}) {
    std::size_t tp = 0, pred_pos = 0, gold_pos = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].label == cls) ++pred_pos;
      if (gold[i] == cls) ++gold_pos;
      if (preds[i].label == cls && gold[i] == cls) ++tp;
    }
    ClassScores s;
    s.precision = pred_pos ? static_cast<double>(tp) / static_cast<double>(pred_pos) : 0.0;
    s.recall = gold_pos ? static_cast<double>(tp) / static_cast<double>(gold_pos) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    m.per_class[cls] = s;
  }
  return m;
}

TransferTask tiny_task() {
  SynthConfig cfg;
  cfg.n_per_language = 120;
  cfg.vocab_size_per_language = 24;
  cfg.lexical_overlap = 0.3;
  cfg.label_signal_strength = 0.9;
  cfg.seed = 4;
  auto corpus = synth_bilingual(cfg);
  return prepare_task(corpus.source, corpus.target, "a", "b", 90, 64,
                      SepStyle::Single, 12, 1, 9);
}

TransferConfig tiny_config() {
  TransferConfig cfg;
  cfg.max_iterations = 1;
  cfg.train.learning_rate = 5e-3;
  cfg.train.epochs = 1;
  cfg.pretrain.learning_rate = 3e-3;
  cfg.pretrain.epochs = 1;
  return cfg;
}

}  // namespace

TEST_CASE("compute_metrics closed forms") {
  std::vector<Prediction> preds{pred_of(Label::Rumour), pred_of(Label::NonRumour)};
  std::vector<Label> gold{Label::Rumour, Label::NonRumour};
  Metrics all = compute_metrics(preds, gold);
  CHECK(all.accuracy == 1.0);
  CHECK(all.per_class.at(Label::Rumour).f1 == 1.0);
  CHECK(all.per_class.at(Label::NonRumour).f1 == 1.0);

  std::vector<Prediction> all_rumour{pred_of(Label::Rumour), pred_of(Label::Rumour)};
  Metrics half = compute_metrics(all_rumour, gold);
  CHECK(half.accuracy == 0.5);
  CHECK(half.per_class.at(Label::NonRumour).recall == 0.0);
  CHECK(half.per_class.at(Label::NonRumour).f1 == 0.0);
  CHECK(half.per_class.at(Label::Rumour).precision == 0.5);
  CHECK(half.per_class.at(Label::Rumour).recall == 1.0);

  CHECK_THROWS_AS(compute_metrics({}, {}), DataError);
  CHECK_THROWS_AS(compute_metrics(preds, {Label::Rumour}), DataError);
}

TEST_CASE("compute_metrics matches an independent recount") {
  Rng rng(57);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<Prediction> preds;
    std::vector<Label> gold;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(pred_of(rng.bernoulli(0.5) ? Label::Rumour : Label::NonRumour));
      gold.push_back(rng.bernoulli(0.5) ? Label::Rumour : Label::NonRumour);
    }
    Metrics got = compute_metrics(preds, gold);
    Metrics want = naive_metrics(preds, gold);
    CHECK(got.accuracy == want.accuracy);
    CHECK(got.n == want.n);
    for (Label cls : {Label::NonRumour, Label::Rumour}) {
      CHECK(got.per_class.at(cls).precision == want.per_class.at(cls).precision);
      CHECK(got.per_class.at(cls).recall == want.per_class.at(cls).recall);
      CHECK(got.per_class.at(cls).f1 == want.per_class.at(cls).f1);
    }
  }
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::ZeroShot, Variant::ST, Variant::ST_GL,
                    Variant::SupervisedSource, Variant::SupervisedTarget,
                    Variant::SupervisedBoth})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_FALSE(variant_from_name("nonsense").has_value());
}

TEST_CASE("prepare_task splits, encodes, and sizes the model consistently") {
  TransferTask task = tiny_task();
  // 120 threads: round(0.2*120)=24 test, rest 96 -> 19 validation, 77 train.
  CHECK(task.source.train.size() == 77);
  CHECK(task.source.validation.size() == 19);
  CHECK(task.source.test.size() == 24);
  CHECK(task.target.train.size() == 77);
  CHECK(task.dims.vocab == task.vocab.size());
  CHECK(task.dims.dim == 12);
  CHECK(task.dims.layers == 1);
  for (const auto& ex : task.source.train)
    for (int id : ex.seq.ids) CHECK(id < task.dims.vocab);
}

TEST_CASE("evaluate_model is deterministic and tags the seed") {
  TransferTask task = tiny_task();
  ClassifierParams params = init_params(task.dims, 3);
  Metrics a = evaluate_model(params, task.target.test, 17);
  Metrics b = evaluate_model(params, task.target.test, 17);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.seed == 17);
  CHECK(a.n == task.target.test.size());
}

TEST_CASE("run_matrix aggregates exactly over its per-seed records") {
  TransferTask task = tiny_task();
  TransferConfig cfg = tiny_config();
  CHECK_THROWS_AS(run_matrix(task, {Variant::ZeroShot}, {1, 2}, cfg), DataError);
  CHECK_THROWS_AS(run_matrix(task, {}, {1, 2, 3}, cfg), DataError);

  auto results = run_matrix(task, {Variant::ZeroShot}, {1, 2, 3}, cfg);
  REQUIRE(results.size() == 1);
  const auto& r = results[0];
  CHECK(r.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(r.errors.empty());
  REQUIRE(r.target_runs.size() == 3);

  double mean = 0.0;
  for (const auto& m : r.target_runs) mean += m.accuracy;
  mean /= 3.0;
  CHECK(r.target_mean == doctest::Approx(mean).epsilon(1e-12));
  double var = 0.0;
  for (const auto& m : r.target_runs) var += (m.accuracy - mean) * (m.accuracy - mean);
  CHECK(r.target_stddev == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-12));

  // Duplicate seeds are duplicate runs: zero spread.
  auto dup = run_matrix(task, {Variant::ZeroShot}, {1, 1, 1}, cfg);
  CHECK(dup[0].target_stddev == 0.0);
}

TEST_CASE("run_matrix parallel execution reproduces the serial results") {
  TransferTask task = tiny_task();
  TransferConfig cfg = tiny_config();
  auto serial = run_matrix(task, {Variant::ZeroShot, Variant::SupervisedTarget},
                           {1, 2, 3}, cfg, 1);
  auto parallel = run_matrix(task, {Variant::ZeroShot, Variant::SupervisedTarget},
                             {1, 2, 3}, cfg, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].target_mean == parallel[i].target_mean);
    CHECK(serial[i].source_mean == parallel[i].source_mean);
    for (std::size_t s = 0; s < serial[i].target_runs.size(); ++s)
      CHECK(serial[i].target_runs[s].accuracy == parallel[i].target_runs[s].accuracy);
  }
}

TEST_CASE("results serialize to parseable JSON lines and a table") {
  TransferTask task = tiny_task();
  auto results = run_matrix(task, {Variant::ZeroShot}, {1, 2, 3}, tiny_config());
  std::string jsonl = results_to_jsonl(results);
  std::istringstream lines(jsonl);
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["variant"] == "zero-shot");
    CHECK(j["seeds"].size() == 3);
    CHECK(j["target_runs"].size() == 3);
    ++count;
  }
  CHECK(count == results.size());

  std::string table = results_to_table(results);
  CHECK(table.find("zero-shot") != std::string::npos);
  CHECK(table.find("a->b") != std::string::npos);
}

TEST_CASE("ablation and sweep tables render one row per entry") {
  std::vector<AblationCell> grid;
  for (bool on : {false, true})
    for (const char* name : {"none", "embeddings", "first_k"})
      grid.push_back({name, on, 0.5, {0.5, 0.5, 0.5}});
  std::string table = ablation_to_table(grid);
  CHECK(std::count(table.begin(), table.end(), '\n') == 7);  // header + 6 cells

  std::vector<SweepRow> rows(3);
  rows[0].fraction = 0.0;
  rows[1].fraction = 0.2;
  rows[2].fraction = 0.4;
  std::string sweep = sweep_to_table(rows);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4);
}

TEST_CASE("trajectory serializers emit one record per iteration") {
  std::vector<IterationRecord> traj(4);
  for (int i = 0; i < 4; ++i) {
    traj[static_cast<std::size_t>(i)].iteration = i;
    traj[static_cast<std::size_t>(i)].target_val_accuracy = 0.5 + 0.1 * i;
    traj[static_cast<std::size_t>(i)].source_val_accuracy = 0.9;
  }
  std::string jsonl = trajectory_to_jsonl(traj);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 4);
  auto first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first["iteration"] == 0);
  CHECK(first["target_val_accuracy"] == 0.5);

  std::string csv = trajectory_to_csv(traj);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows
  CHECK(csv.rfind("iteration,", 0) == 0);
}

TEST_CASE("sweep validates fractions") {
  TransferTask task = tiny_task();
  TransferConfig cfg = tiny_config();
  CHECK_THROWS_AS(run_semi_supervised_sweep(task, {0.4, 0.2}, {1, 2, 3}, cfg),
                  DataError);
  CHECK_THROWS_AS(run_semi_supervised_sweep(task, {0.0, 1.2}, {1, 2, 3}, cfg),
                  DataError);
  CHECK_THROWS_AS(run_semi_supervised_sweep(task, {0.0}, {1, 2}, cfg), DataError);
}

TEST_CASE("benchmark preset values stay pinned") {
  SynthConfig synth = benchmark_synth_config();
  CHECK(synth.n_per_language == 2000);
  CHECK(synth.vocab_size_per_language == 150);
  CHECK(synth.lexical_overlap == 0.3);
  CHECK(synth.label_signal_strength == 0.85);
  CHECK(synth.reaction_count_min == 2);
  CHECK(synth.reaction_count_max == 5);
  CHECK(synth.seed == 42);

  TransferConfig cfg = benchmark_transfer_config();
  CHECK(cfg.p == 0.95);
  CHECK(cfg.max_iterations == 7);
  CHECK(cfg.train.learning_rate == 4.5e-3);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.batch_size == 16);
  CHECK(cfg.train.dropout == 0.1);
  CHECK(cfg.pretrain.learning_rate == 3e-3);
  CHECK(cfg.pretrain.epochs == 3);
  CHECK(cfg.pretrain.batch_size == 8);
  CHECK(cfg.mask_prob == 0.15);
  CHECK(cfg.freeze_initial_teacher);
  CHECK(cfg.adaptive_pretraining);

  CHECK(benchmark_seeds() == std::vector<std::uint64_t>{1, 2, 3});
}
