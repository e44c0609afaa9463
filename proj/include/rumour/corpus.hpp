#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rumour {

enum class Label : int { NonRumour = 0, Rumour = 1 };

std::string label_to_string(Label l);
std::optional<Label> label_from_string(const std::string& s);

struct Reaction {
  std::string text;
  std::int64_t timestamp = 0;
};

// One source post plus its time-ordered reactions.
struct Thread {
  std::string id;
  std::string source_text;
  std::vector<Reaction> reactions;  // sorted by (timestamp, then thread id order as loaded)
  std::optional<Label> label;
  std::string language;
  std::string group;  // optional event group for event-disjoint folds
};

struct DatasetSplit {
  std::vector<Thread> train;
  std::vector<Thread> validation;
  std::vector<Thread> test;
  std::uint64_t seed = 0;
};

struct StatsTable {
  std::size_t threads = 0;
  std::size_t rumours = 0;
  std::size_t non_rumours = 0;
  std::size_t unlabeled = 0;
  std::size_t total_reactions = 0;
  double avg_reactions = 0.0;
  std::size_t max_reactions = 0;
  std::size_t min_reactions = 0;
};

// Reads UTF-8 JSON Lines, one thread per line. Validates ids (nonempty,
// unique), nonempty source text, and re-sorts reactions by timestamp.
// Malformed lines raise DataError naming the line number.
std::vector<Thread> load_jsonl(const std::string& path);

void save_jsonl(const std::vector<Thread>& threads, const std::string& path);

// Reserves round(0.2*N) threads as test, splits the rest 4:1 into
// train/validation. Deterministic per seed; shuffle uniform over permutations.
DatasetSplit split_dataset(const std::vector<Thread>& threads,
                           std::uint64_t seed);

// k folds, event-disjoint when groups are present, else stratified by label.
std::vector<DatasetSplit> kfold_split(const std::vector<Thread>& threads,
                                      int k, std::uint64_t seed);

StatsTable dataset_stats(const std::vector<Thread>& threads);

struct SynthConfig {
  std::size_t n_per_language = 2000;
  std::size_t vocab_size_per_language = 60;
  double lexical_overlap = 0.3;
  double label_signal_strength = 0.85;
  std::size_t reaction_count_min = 2;
  std::size_t reaction_count_max = 5;
  std::uint64_t seed = 0;
};

struct BilingualCorpus {
  std::vector<Thread> source;
  std::vector<Thread> target;
};

// Generates two label-balanced corpora over disjoint surface alphabets except
// for exactly round(overlap * vocab_size) shared word strings. Non-shared
// words are linked by a fixed bijection so the latent task is identical.
BilingualCorpus synth_bilingual(const SynthConfig& cfg);

}  // namespace rumour
