#include "rumour/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "rumour/errors.hpp"
#include "rumour/rng.hpp"

namespace rumour {

using json = nlohmann::json;

std::string label_to_string(Label l) {
  return l == Label::Rumour ? "rumour" : "non-rumour";
}

std::optional<Label> label_from_string(const std::string& s) {
  std::string lower;
  lower.reserve(s.size());
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "rumour" || lower == "rumor") return Label::Rumour;
  if (lower == "non-rumour" || lower == "non-rumor" || lower == "nonrumour")
    return Label::NonRumour;
  return std::nullopt;
}

namespace {

void sort_reactions(Thread& t) {
  std::stable_sort(t.reactions.begin(), t.reactions.end(),
                   [](const Reaction& a, const Reaction& b) {
                     return a.timestamp < b.timestamp;
                   });
}

Thread parse_thread(const json& j, std::size_t line_no) {
  auto fail = [line_no](const std::string& what) -> DataError {
    std::ostringstream os;
    os << "line " << line_no << ": " << what;
    return DataError(os.str());
  };
  if (!j.is_object()) throw fail("record is not a JSON object");
  Thread t;
  if (!j.contains("id") || !j["id"].is_string()) throw fail("missing or non-string field 'id'");
  t.id = j["id"].get<std::string>();
  if (t.id.empty()) throw fail("empty 'id'");
  if (!j.contains("source_text") || !j["source_text"].is_string())
    throw fail("missing or non-string field 'source_text'");
  t.source_text = j["source_text"].get<std::string>();
  if (t.source_text.empty()) throw fail("empty 'source_text'");
  if (!j.contains("reactions") || !j["reactions"].is_array())
    throw fail("missing or non-array field 'reactions'");
  for (const auto& r : j["reactions"]) {
    if (!r.is_object() || !r.contains("text") || !r.contains("timestamp") ||
        !r["text"].is_string() || !r["timestamp"].is_number_integer())
      throw fail("malformed entry in field 'reactions'");
    t.reactions.push_back({r["text"].get<std::string>(), r["timestamp"].get<std::int64_t>()});
  }
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw fail("non-string field 'label'");
    auto l = label_from_string(j["label"].get<std::string>());
    if (!l) throw fail("unrecognized value in field 'label': " + j["label"].get<std::string>());
    t.label = l;
  }
  if (!j.contains("language") || !j["language"].is_string())
    throw fail("missing or non-string field 'language'");
  t.language = j["language"].get<std::string>();
  if (j.contains("group") && j["group"].is_string()) t.group = j["group"].get<std::string>();
  sort_reactions(t);
  return t;
}

}  // namespace

std::vector<Thread> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<Thread> threads;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream os;
      os << "line " << line_no << ": invalid JSON (" << e.what() << ")";
      throw DataError(os.str());
    }
    Thread t = parse_thread(j, line_no);
    if (!seen.insert(t.id).second)
      throw DataError("duplicate thread id: " + t.id);
    threads.push_back(std::move(t));
  }
  return threads;
}

void save_jsonl(const std::vector<Thread>& threads, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const auto& t : threads) {
    json j;
    j["id"] = t.id;
    j["source_text"] = t.source_text;
    json reactions = json::array();
    for (const auto& r : t.reactions)
      reactions.push_back({{"text", r.text}, {"timestamp", r.timestamp}});
    j["reactions"] = std::move(reactions);
    if (t.label) j["label"] = label_to_string(*t.label);
    j["language"] = t.language;
    if (!t.group.empty()) j["group"] = t.group;
    out << j.dump() << "\n";
  }
}

namespace {

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

}  // namespace

DatasetSplit split_dataset(const std::vector<Thread>& threads,
                           std::uint64_t seed) {
  const std::size_t n = threads.size();
  if (n < 10) throw DataError("split_dataset needs at least 10 threads");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n_test = round_half_up(0.2 * static_cast<double>(n));
  const std::size_t rest = n - n_test;
  const std::size_t n_val = round_half_up(static_cast<double>(rest) / 5.0);
  const std::size_t n_train = rest - n_val;

  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const Thread& t = threads[order[i]];
    if (i < n_test)
      split.test.push_back(t);
    else if (i < n_test + n_train)
      split.train.push_back(t);
    else
      split.validation.push_back(t);
  }
  return split;
}

std::vector<DatasetSplit> kfold_split(const std::vector<Thread>& threads,
                                      int k, std::uint64_t seed) {
  if (k < 2) throw DataError("kfold_split needs k >= 2");
  if (threads.size() < static_cast<std::size_t>(k))
    throw DataError("kfold_split: fewer threads than folds");

  const bool grouped = std::any_of(threads.begin(), threads.end(),
                                   [](const Thread& t) { return !t.group.empty(); });
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));

  if (grouped) {
    // Event-disjoint folds: whole groups assigned round-robin by size.
    std::map<std::string, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < threads.size(); ++i)
      by_group[threads[i].group.empty() ? threads[i].id : threads[i].group].push_back(i);
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(by_group.begin(),
                                                                         by_group.end());
    rng.shuffle(groups);
    std::stable_sort(groups.begin(), groups.end(),
                     [](const auto& a, const auto& b) {
                       return a.second.size() > b.second.size();
                     });
    std::vector<std::size_t> fold_sizes(static_cast<std::size_t>(k), 0);
    for (auto& [name, members] : groups) {
      std::size_t dest = static_cast<std::size_t>(
          std::min_element(fold_sizes.begin(), fold_sizes.end()) - fold_sizes.begin());
      for (std::size_t idx : members) folds[dest].push_back(idx);
      fold_sizes[dest] += members.size();
    }
  } else {
    // Stratified by label: shuffle within each class, deal out round-robin.
    std::vector<std::size_t> order(threads.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t counter = 0;
    for (int cls = 0; cls < 3; ++cls) {  // rumour, non-rumour, unlabeled
      for (std::size_t idx : order) {
        const auto& lab = threads[idx].label;
        int bucket = lab ? static_cast<int>(*lab) : 2;
        if (bucket != cls) continue;
        folds[counter % static_cast<std::size_t>(k)].push_back(idx);
        ++counter;
      }
    }
  }

  std::vector<DatasetSplit> result;
  for (int f = 0; f < k; ++f) {
    DatasetSplit split;
    split.seed = seed;
    std::vector<Thread> rest;
    for (int g = 0; g < k; ++g) {
      for (std::size_t idx : folds[static_cast<std::size_t>(g)]) {
        if (g == f)
          split.test.push_back(threads[idx]);
        else
          rest.push_back(threads[idx]);
      }
    }
    // Remaining folds split 4:1 into train/validation.
    Rng fold_rng = rng.fork(static_cast<std::uint64_t>(f));
    rng = Rng(seed);  // keep outer stream stable across folds
    std::vector<std::size_t> order(rest.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    fold_rng.shuffle(order);
    const std::size_t n_val = round_half_up(static_cast<double>(rest.size()) / 5.0);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < n_val)
        split.validation.push_back(rest[order[i]]);
      else
        split.train.push_back(rest[order[i]]);
    }
    result.push_back(std::move(split));
  }
  return result;
}

StatsTable dataset_stats(const std::vector<Thread>& threads) {
  if (threads.empty()) throw DataError("dataset_stats on empty dataset");
  StatsTable s;
  s.threads = threads.size();
  s.min_reactions = threads.front().reactions.size();
  for (const auto& t : threads) {
    if (t.label == Label::Rumour)
      ++s.rumours;
    else if (t.label == Label::NonRumour)
      ++s.non_rumours;
    else
      ++s.unlabeled;
    s.total_reactions += t.reactions.size();
    s.max_reactions = std::max(s.max_reactions, t.reactions.size());
    s.min_reactions = std::min(s.min_reactions, t.reactions.size());
  }
  s.avg_reactions = static_cast<double>(s.total_reactions) / static_cast<double>(s.threads);
  return s;
}

namespace {

// Deterministic distinct word over an alphabet, indexed. Base-|alphabet|
// encoding with fixed width keeps every word unique and 3+ chars long.
std::string make_word(const std::string& alphabet, std::size_t index,
                      std::size_t width) {
  std::string w(width, alphabet[0]);
  for (std::size_t pos = width; pos-- > 0;) {
    w[pos] = alphabet[index % alphabet.size()];
    index /= alphabet.size();
  }
  return w;
}

}  // namespace

BilingualCorpus synth_bilingual(const SynthConfig& cfg) {
  if (cfg.lexical_overlap < 0.0 || cfg.lexical_overlap > 1.0)
    throw DataError("lexical_overlap must be in [0, 1]");
  if (cfg.label_signal_strength <= 0.0 || cfg.label_signal_strength > 1.0)
    throw DataError("label_signal_strength must be in (0, 1]");
  if (cfg.vocab_size_per_language < 4)
    throw DataError("vocab_size_per_language must be >= 4");
  if (cfg.reaction_count_min > cfg.reaction_count_max)
    throw DataError("reaction_count_range is inverted");

  const std::size_t vocab = cfg.vocab_size_per_language;
  const std::size_t n_shared =
      round_half_up(cfg.lexical_overlap * static_cast<double>(vocab));

  // Latent slots 0..vocab-1: one third prefers Rumour, one third NonRumour,
  // the rest is neutral.
  const std::size_t third = vocab / 3;
  std::vector<int> slot_class(vocab, 2);  // 0 rumour-ish, 1 nonrumour-ish, 2 neutral
  for (std::size_t i = 0; i < third; ++i) slot_class[i] = 0;
  for (std::size_t i = third; i < 2 * third; ++i) slot_class[i] = 1;

  // Shared slots lean neutral (mostly from the neutral pool): the overlap provides
  // anchor words in both classes without handing over the whole label signal
  // at the surface level.
  std::vector<bool> shared(vocab, false);
  if (n_shared > 0) {
    std::vector<std::size_t> neutral, rum, non;
    for (std::size_t j = 0; j < vocab; ++j) {
      if (slot_class[j] == 2) neutral.push_back(j);
      else if (slot_class[j] == 0) rum.push_back(j);
      else non.push_back(j);
    }
    std::vector<std::size_t> order;
    const std::size_t n_neutral_shared =
        std::min(neutral.size(), (n_shared * 7 + 5) / 10);
    order.insert(order.end(), neutral.begin(),
                 neutral.begin() + static_cast<std::ptrdiff_t>(n_neutral_shared));
    for (std::size_t i = 0; i < std::max(rum.size(), non.size()); ++i) {
      if (i < rum.size()) order.push_back(rum[i]);
      if (i < non.size()) order.push_back(non[i]);
    }
    order.insert(order.end(), neutral.begin() + static_cast<std::ptrdiff_t>(n_neutral_shared),
                 neutral.end());
    for (std::size_t i = 0; i < n_shared; ++i) shared[order[i]] = true;
  }

  // One character inventory for both languages. Non-shared words come from
  // disjoint index ranges, so the word-level overlap is exactly the shared
  // slots, while subword pieces still collide across languages the way real
  // multilingual subword vocabularies do.
  const std::string alpha = "abcdefgh";
  auto scatter = [](std::size_t idx) { return (idx * 151 + 7) % 4096; };
  std::vector<std::string> source_words(vocab), target_words(vocab);
  std::size_t shared_idx = 0, own_idx = 0;
  for (std::size_t j = 0; j < vocab; ++j) {
    if (shared[j]) {
      std::string w = make_word(alpha, scatter(shared_idx++), 4);
      source_words[j] = w;
      target_words[j] = w;
    } else {
      source_words[j] = make_word(alpha, scatter(1237 + own_idx), 4);
      target_words[j] = make_word(alpha, scatter(2749 + own_idx), 4);
      ++own_idx;
    }
  }

  std::vector<std::size_t> rumour_slots, nonrumour_slots, neutral_slots;
  for (std::size_t j = 0; j < vocab; ++j) {
    if (slot_class[j] == 0) rumour_slots.push_back(j);
    if (slot_class[j] == 1) nonrumour_slots.push_back(j);
    if (slot_class[j] == 2) neutral_slots.push_back(j);
  }

  Rng rng(cfg.seed);
  // A third of the words carry no label signal. The rest side with the
  // thread's class with the thread's own strength, otherwise with the
  // opposite class, so the two label-conditioned distributions overlap
  // unless the strength is 1.
  auto sample_slot = [&](Label label, double strength, Rng& r) -> std::size_t {
    if (r.uniform() < 1.0 / 3.0)
      return neutral_slots[static_cast<std::size_t>(r.below(neutral_slots.size()))];
    const bool own = r.uniform() < strength;
    const auto& pool = ((label == Label::Rumour) == own) ? rumour_slots : nonrumour_slots;
    return pool[static_cast<std::size_t>(r.below(pool.size()))];
  };

  // Per-thread strength is uniform on [2s-1, 1] (clamped below at 0), which
  // has mean label_signal_strength and collapses to 1 when s = 1. Low-draw
  // threads are genuinely ambiguous.
  auto draw_strength = [&](Rng& r) -> double {
    const double s = cfg.label_signal_strength;
    const double lo = std::max(0.0, 2.0 * s - 1.0);
    return r.uniform(lo, 1.0);
  };

  auto make_text = [&](Label label, double strength,
                       const std::vector<std::string>& words, std::size_t n_words,
                       Rng& r) {
    std::string text;
    for (std::size_t i = 0; i < n_words; ++i) {
      if (i) text.push_back(' ');
      text += words[sample_slot(label, strength, r)];
    }
    return text;
  };

  auto make_language = [&](const std::string& lang,
                           const std::vector<std::string>& words, Rng lang_rng) {
    std::vector<Thread> out;
    for (std::size_t i = 0; i < cfg.n_per_language; ++i) {
      Thread t;
      t.language = lang;
      t.id = lang + "-" + std::to_string(i);
      t.label = (i % 2 == 0) ? Label::Rumour : Label::NonRumour;
      const double strength = draw_strength(lang_rng);
      t.source_text = make_text(*t.label, strength, words,
                                static_cast<std::size_t>(lang_rng.range(3, 5)),
                                lang_rng);
      std::size_t n_reactions = static_cast<std::size_t>(lang_rng.range(
          static_cast<std::int64_t>(cfg.reaction_count_min),
          static_cast<std::int64_t>(cfg.reaction_count_max)));
      std::int64_t ts = 1600000000;
      for (std::size_t ri = 0; ri < n_reactions; ++ri) {
        ts += lang_rng.range(10, 600);
        t.reactions.push_back(
            {make_text(*t.label, strength, words,
                       static_cast<std::size_t>(lang_rng.range(1, 2)), lang_rng),
             ts});
      }
      out.push_back(std::move(t));
    }
    return out;
  };

  BilingualCorpus corpus;
  corpus.source = make_language("synthA", source_words, rng.fork(1));
  corpus.target = make_language("synthB", target_words, rng.fork(2));
  return corpus;
}

}  // namespace rumour
