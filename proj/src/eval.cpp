#include "rumour/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rumour/errors.hpp"

namespace rumour {

using json = nlohmann::json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::ZeroShot: return "zero-shot";
    case Variant::ST: return "st";
    case Variant::ST_GL: return "st+gl";
    case Variant::SupervisedSource: return "supervised-source";
    case Variant::SupervisedTarget: return "supervised-target";
    case Variant::SupervisedBoth: return "supervised-both";
  }
  return "unknown";
}

std::optional<Variant> variant_from_name(const std::string& s) {
  for (Variant v : {Variant::ZeroShot, Variant::ST, Variant::ST_GL,
                    Variant::SupervisedSource, Variant::SupervisedTarget,
                    Variant::SupervisedBoth})
    if (variant_name(v) == s) return v;
  return std::nullopt;
}

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

std::vector<LabeledExample> encode_all(const std::vector<Thread>& threads,
                                       const Vocabulary& vocab,
                                       std::size_t max_seq_len, SepStyle style) {
  std::vector<LabeledExample> out;
  for (const auto& t : threads) {
    if (!t.label) continue;  // unlabeled threads cannot enter evaluation splits
    out.push_back({t.id, encode_thread(t, vocab, max_seq_len, style), *t.label});
  }
  return out;
}

std::pair<double, double> mean_stddev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());  // population stddev
  return {mean, std::sqrt(var)};
}

std::vector<TokenSequence> pretrain_sequences(const TransferTask& task) {
  std::vector<TokenSequence> seqs;
  for (const auto& ex : task.source.train) seqs.push_back(ex.seq);
  for (const auto& ex : task.target.train) seqs.push_back(ex.seq);
  return seqs;
}

ClassifierParams fit_teacher_for(const TransferTask& task,
                                 const TransferConfig& cfg) {
  TransferConfig run_cfg = cfg;
  run_cfg.train.seed = mix64(cfg.seed, 0x7e0cULL);
  run_cfg.pretrain.seed = mix64(cfg.seed, 0x91a5ULL);
  ClassifierParams params = init_params(task.dims, mix64(cfg.seed, 0x1217ULL));
  return fit_teacher(std::move(params), task.source.train,
                     pretrain_sequences(task), task.vocab, run_cfg);
}

ClassifierParams train_plain(const TransferTask& task,
                             const std::vector<LabeledExample>& examples,
                             const TransferConfig& cfg) {
  ClassifierParams params = init_params(task.dims, mix64(cfg.seed, 0x1217ULL));
  if (cfg.adaptive_pretraining) {
    TrainConfig pre = cfg.pretrain;
    pre.seed = mix64(cfg.seed, 0x91a5ULL);
    params = adaptive_pretrain(std::move(params), pretrain_sequences(task),
                               task.vocab, pre, cfg.mask_prob);
  }
  if (examples.empty()) return params;  // untrained baseline
  std::vector<LabeledSeq> data;
  for (const auto& ex : examples) data.emplace_back(ex.seq, ex.label);
  TrainConfig fine = cfg.train;
  fine.seed = mix64(cfg.seed, 0x7e0cULL);
  return train_supervised(std::move(params), data, fine);
}

// Runs independent jobs across `parallel` worker threads. Each job writes
// only to its own output slot, so the assembled result is identical to the
// serial order regardless of scheduling.
void run_jobs(std::vector<std::function<void()>>& jobs, int parallel) {
  if (parallel <= 1 || jobs.size() <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      jobs[i]();
    }
  };
  const int n = std::min<int>(parallel, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace

TransferTask prepare_task(const std::vector<Thread>& source_threads,
                          const std::vector<Thread>& target_threads,
                          const std::string& source_name,
                          const std::string& target_name,
                          std::size_t vocab_size, std::size_t max_seq_len,
                          SepStyle sep_style, int model_dim, int model_layers,
                          std::uint64_t seed) {
  TransferTask task;
  task.source_name = source_name;
  task.target_name = target_name;
  DatasetSplit src = split_dataset(source_threads, mix64(seed, 1));
  DatasetSplit tgt = split_dataset(target_threads, mix64(seed, 2));

  // Shared multilingual-style vocabulary over both training partitions.
  std::vector<std::vector<Thread>> corpora{src.train, tgt.train};
  task.vocab = train_subwords(corpora, vocab_size, seed);

  task.source.train = encode_all(src.train, task.vocab, max_seq_len, sep_style);
  task.source.validation = encode_all(src.validation, task.vocab, max_seq_len, sep_style);
  task.source.test = encode_all(src.test, task.vocab, max_seq_len, sep_style);
  task.target.train = encode_all(tgt.train, task.vocab, max_seq_len, sep_style);
  task.target.validation = encode_all(tgt.validation, task.vocab, max_seq_len, sep_style);
  task.target.test = encode_all(tgt.test, task.vocab, max_seq_len, sep_style);
  task.dims = {task.vocab.size(), model_dim, model_layers};
  return task;
}

Metrics compute_metrics(const std::vector<Prediction>& preds,
                        const std::vector<Label>& gold) {
  if (preds.size() != gold.size())
    throw DataError("compute_metrics: prediction/gold length mismatch");
  if (preds.empty()) throw DataError("compute_metrics: empty input");
  Metrics m;
  m.n = preds.size();
  std::size_t correct = 0;
  for (Label cls : {Label::NonRumour, Label::Rumour}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const bool pred_is = preds[i].label == cls;
      const bool gold_is = gold[i] == cls;
      if (pred_is && gold_is) ++tp;
      if (pred_is && !gold_is) ++fp;
      if (!pred_is && gold_is) ++fn;
    }
    ClassScores s;
    s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    s.f1 = s.precision + s.recall == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    m.per_class[cls] = s;
  }
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == gold[i]) ++correct;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  return m;
}

Metrics evaluate_model(const ClassifierParams& params,
                       const std::vector<LabeledExample>& examples,
                       std::uint64_t seed) {
  std::vector<Prediction> preds;
  std::vector<Label> gold;
  for (const auto& ex : examples) {
    preds.push_back(predict_one(params, ex.seq));
    gold.push_back(ex.label);
  }
  Metrics m = compute_metrics(preds, gold);
  m.seed = seed;
  return m;
}

std::vector<ExperimentResult> run_matrix(const TransferTask& task,
                                         const std::vector<Variant>& variants,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TransferConfig& base_cfg,
                                         int parallel) {
  if (variants.empty() || seeds.size() < 3)
    throw DataError("run_matrix needs >= 1 variant and >= 3 seeds");

  struct RunSlot {
    std::optional<Metrics> target;
    std::optional<Metrics> source;
    std::string error;
  };
  std::vector<RunSlot> slots(variants.size() * seeds.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      jobs.push_back([&, vi, si] {
        const Variant variant = variants[vi];
        const std::uint64_t seed = seeds[si];
        RunSlot& slot = slots[vi * seeds.size() + si];
        TransferConfig cfg = base_cfg;
        cfg.seed = seed;
        try {
          ClassifierParams model;
          switch (variant) {
            case Variant::ZeroShot:
            case Variant::SupervisedSource:
              model = fit_teacher_for(task, cfg);
              break;
            case Variant::ST:
              cfg.use_gold_labels = false;
              model = run_transfer(task.dims, task.source, task.target, task.vocab, cfg)
                          .final_params;
              break;
            case Variant::ST_GL:
              cfg.use_gold_labels = true;
              model = run_transfer(task.dims, task.source, task.target, task.vocab, cfg)
                          .final_params;
              break;
            case Variant::SupervisedTarget:
              model = train_plain(task, task.target.train, cfg);
              break;
            case Variant::SupervisedBoth: {
              std::vector<LabeledExample> both = task.source.train;
              both.insert(both.end(), task.target.train.begin(), task.target.train.end());
              model = train_plain(task, both, cfg);
              break;
            }
          }
          slot.target = evaluate_model(model, task.target.test, seed);
          slot.source = evaluate_model(model, task.source.test, seed);
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "seed " << seed << ": " << e.what();
          slot.error = os.str();
        }
      });
    }
  }
  run_jobs(jobs, parallel);

  std::vector<ExperimentResult> results;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    ExperimentResult r;
    r.source_name = task.source_name;
    r.target_name = task.target_name;
    r.variant = variants[vi];
    r.seeds = seeds;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      RunSlot& slot = slots[vi * seeds.size() + si];
      if (!slot.error.empty()) {
        r.errors.push_back(std::move(slot.error));
        continue;
      }
      r.target_runs.push_back(std::move(*slot.target));
      r.source_runs.push_back(std::move(*slot.source));
    }
    std::vector<double> target_accs, source_accs;
    for (const auto& m : r.target_runs) target_accs.push_back(m.accuracy);
    for (const auto& m : r.source_runs) source_accs.push_back(m.accuracy);
    std::tie(r.target_mean, r.target_stddev) = mean_stddev(target_accs);
    std::tie(r.source_mean, r.source_stddev) = mean_stddev(source_accs);
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<AblationCell> run_ablation(const TransferTask& task,
                                       const std::vector<std::uint64_t>& seeds,
                                       const TransferConfig& base_cfg,
                                       int parallel) {
  if (seeds.size() < 3) throw DataError("run_ablation needs >= 3 seeds");
  const int k = std::min(3, task.dims.layers);
  const std::vector<std::pair<std::string, FreezePolicy>> freeze_options{
      {"none", FreezePolicy::none()},
      {"embeddings", FreezePolicy::embeddings_only()},
      {"first_k", FreezePolicy::first_k_layers(k)},
  };
  std::vector<AblationCell> grid;
  for (bool pretrain_on : {false, true}) {
    for (const auto& [name, policy] : freeze_options) {
      AblationCell cell;
      cell.freeze_name = name;
      cell.pretrain_on = pretrain_on;
      cell.per_seed.assign(seeds.size(), 0.0);
      grid.push_back(std::move(cell));
    }
  }

  std::vector<std::exception_ptr> failures(grid.size() * seeds.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t ci = 0; ci < grid.size(); ++ci) {
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      jobs.push_back([&, ci, si] {
        try {
          AblationCell& cell = grid[ci];
          TransferConfig cfg = base_cfg;
          cfg.seed = seeds[si];
          cfg.adaptive_pretraining = cell.pretrain_on;
          cfg.teacher_freeze_override =
              cell.freeze_name == "none"         ? FreezePolicy::none()
              : cell.freeze_name == "embeddings" ? FreezePolicy::embeddings_only()
                                                 : FreezePolicy::first_k_layers(k);
          ClassifierParams teacher = fit_teacher_for(task, cfg);
          cell.per_seed[si] =
              evaluate_model(teacher, task.target.test, seeds[si]).accuracy;
        } catch (...) {
          failures[ci * seeds.size() + si] = std::current_exception();
        }
      });
    }
  }
  run_jobs(jobs, parallel);
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  for (auto& cell : grid) cell.target_accuracy_mean = mean_stddev(cell.per_seed).first;
  return grid;
}

std::vector<SweepRow> run_semi_supervised_sweep(
    const TransferTask& task, const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds, const TransferConfig& base_cfg,
    int parallel) {
  if (seeds.size() < 3) throw DataError("run_semi_supervised_sweep needs >= 3 seeds");
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    throw DataError("fractions must be sorted ascending");
  std::vector<SweepRow> rows;
  for (double fraction : fractions) {
    if (fraction < 0.0 || fraction > 1.0)
      throw DataError("fractions must lie in [0, 1]");
    SweepRow row;
    row.fraction = fraction;
    row.framework_per_seed.assign(seeds.size(), 0.0);
    row.supervised_per_seed.assign(seeds.size(), 0.0);
    rows.push_back(std::move(row));
  }

  std::vector<std::exception_ptr> failures(rows.size() * seeds.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t fi = 0; fi < rows.size(); ++fi) {
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      jobs.push_back([&, fi, si] {
        try {
          SweepRow& row = rows[fi];
          const std::uint64_t seed = seeds[si];
          TransferConfig cfg = base_cfg;
          cfg.seed = seed;
          cfg.target_gold_fraction = row.fraction;
          auto transfer =
              run_transfer(task.dims, task.source, task.target, task.vocab, cfg);
          row.framework_per_seed[si] =
              evaluate_model(transfer.final_params, task.target.test, seed).accuracy;

          // Supervised baseline: the same revealed gold fraction, nothing else.
          auto revealed = semi_supervised_reveal(row.fraction, task.target.train,
                                                 mix64(seed, 0x60dULL));
          std::vector<LabeledExample> gold;
          for (const auto& ex : task.target.train)
            if (revealed.count(ex.thread_id)) gold.push_back(ex);
          TransferConfig sup_cfg = cfg;
          sup_cfg.adaptive_pretraining = false;
          ClassifierParams baseline = train_plain(task, gold, sup_cfg);
          row.supervised_per_seed[si] =
              evaluate_model(baseline, task.target.test, seed).accuracy;
        } catch (...) {
          failures[fi * seeds.size() + si] = std::current_exception();
        }
      });
    }
  }
  run_jobs(jobs, parallel);
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  for (auto& row : rows) {
    row.framework_accuracy_mean = mean_stddev(row.framework_per_seed).first;
    row.supervised_accuracy_mean = mean_stddev(row.supervised_per_seed).first;
  }
  return rows;
}

namespace {

json metrics_to_json(const Metrics& m) {
  json j;
  j["accuracy"] = m.accuracy;
  j["n"] = m.n;
  j["seed"] = m.seed;
  for (const auto& [cls, s] : m.per_class) {
    json c{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
    j["per_class"][label_to_string(cls)] = std::move(c);
  }
  return j;
}

}  // namespace

std::string results_to_jsonl(const std::vector<ExperimentResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    json j;
    j["source"] = r.source_name;
    j["target"] = r.target_name;
    j["variant"] = variant_name(r.variant);
    j["seeds"] = r.seeds;
    j["target_mean"] = r.target_mean;
    j["target_stddev"] = r.target_stddev;
    j["source_mean"] = r.source_mean;
    j["source_stddev"] = r.source_stddev;
    j["target_runs"] = json::array();
    for (const auto& m : r.target_runs) j["target_runs"].push_back(metrics_to_json(m));
    j["source_runs"] = json::array();
    for (const auto& m : r.source_runs) j["source_runs"].push_back(metrics_to_json(m));
    j["errors"] = r.errors;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::string results_to_table(const std::vector<ExperimentResult>& results) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(24) << "direction" << std::setw(20) << "variant"
     << std::setw(18) << "target acc" << std::setw(18) << "source acc"
     << "errors\n";
  for (const auto& r : results) {
    os << std::left << std::setw(24) << (r.source_name + "->" + r.target_name)
       << std::setw(20) << variant_name(r.variant);
    std::ostringstream t, s;
    t << std::fixed << std::setprecision(3) << r.target_mean << " +/- " << r.target_stddev;
    s << std::fixed << std::setprecision(3) << r.source_mean << " +/- " << r.source_stddev;
    os << std::setw(18) << t.str() << std::setw(18) << s.str() << r.errors.size()
       << "\n";
  }
  return os.str();
}

std::string ablation_to_table(const std::vector<AblationCell>& grid) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(12) << "pretrain" << std::setw(14) << "freeze"
     << "target acc\n";
  for (const auto& c : grid) {
    os << std::left << std::setw(12) << (c.pretrain_on ? "on" : "off")
       << std::setw(14) << c.freeze_name << c.target_accuracy_mean << "\n";
  }
  return os.str();
}

std::string sweep_to_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(12) << "fraction" << std::setw(14) << "framework"
     << "supervised\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.fraction << std::setw(14)
       << r.framework_accuracy_mean << r.supervised_accuracy_mean << "\n";
  }
  return os.str();
}

std::string trajectory_to_jsonl(const std::vector<IterationRecord>& trajectory) {
  std::ostringstream os;
  for (const auto& rec : trajectory) {
    json j;
    j["iteration"] = rec.iteration;
    j["silver_before_filter"] = rec.silver_before_filter;
    j["silver_after_filter"] = rec.silver_after_filter;
    j["silver_after_balance"] = rec.silver_after_balance;
    j["degenerate"] = rec.degenerate;
    j["target_val_accuracy"] = rec.target_val_accuracy;
    if (rec.source_val_accuracy) j["source_val_accuracy"] = *rec.source_val_accuracy;
    os << j.dump() << "\n";
  }
  return os.str();
}

SynthConfig benchmark_synth_config() {
  SynthConfig cfg;
  cfg.n_per_language = 2000;
  cfg.vocab_size_per_language = 150;
  cfg.lexical_overlap = 0.3;
  cfg.label_signal_strength = 0.85;
  cfg.reaction_count_min = 2;
  cfg.reaction_count_max = 5;
  cfg.seed = 42;
  return cfg;
}

TransferTask prepare_benchmark_task() {
  BilingualCorpus corpus = synth_bilingual(benchmark_synth_config());
  return prepare_task(corpus.source, corpus.target, "synthA", "synthB",
                      /*vocab_size=*/420, /*max_seq_len=*/384, SepStyle::Single,
                      /*model_dim=*/32, /*model_layers=*/2, /*seed=*/7);
}

TransferConfig benchmark_transfer_config() {
  TransferConfig cfg;
  cfg.p = 0.95;
  cfg.max_iterations = 7;
  // The small dense model needs far larger steps than a pretrained
  // transformer; batch sizes, dropout, and the threshold keep their defaults.
  cfg.train.learning_rate = 4.5e-3;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 16;
  cfg.train.dropout = 0.1;
  cfg.pretrain.learning_rate = 3e-3;
  cfg.pretrain.epochs = 3;
  cfg.pretrain.batch_size = 8;
  return cfg;
}

std::vector<std::uint64_t> benchmark_seeds() { return {1, 2, 3}; }

std::string trajectory_to_csv(const std::vector<IterationRecord>& trajectory) {
  std::ostringstream os;
  os << "iteration,silver_before_filter,silver_after_filter,silver_after_balance,"
        "degenerate,target_val_accuracy,source_val_accuracy\n";
  for (const auto& rec : trajectory) {
    os << rec.iteration << "," << rec.silver_before_filter << ","
       << rec.silver_after_filter << "," << rec.silver_after_balance << ","
       << (rec.degenerate ? 1 : 0) << "," << rec.target_val_accuracy << ",";
    if (rec.source_val_accuracy) os << *rec.source_val_accuracy;
    os << "\n";
  }
  return os.str();
}

}  // namespace rumour
