#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "rumour/corpus.hpp"
#include "rumour/errors.hpp"

using namespace rumour;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("rumour_test_" + name);
}

Thread make_thread(const std::string& id, Label label,
                   const std::string& text = "aaa bbb") {
  Thread t;
  t.id = id;
  t.source_text = text;
  t.label = label;
  t.language = "synthA";
  t.reactions = {{"ccc", 20}, {"ddd", 10}};
  return t;
}

std::vector<Thread> make_threads(std::size_t n) {
  std::vector<Thread> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(make_thread("t" + std::to_string(i),
                              i % 2 ? Label::Rumour : Label::NonRumour));
  return out;
}

}  // namespace

TEST_CASE("label strings round-trip and parse case-insensitively") {
  CHECK(label_to_string(Label::Rumour) == "rumour");
  CHECK(label_to_string(Label::NonRumour) == "non-rumour");
  CHECK(label_from_string("rumour") == Label::Rumour);
  CHECK(label_from_string("RUMOUR") == Label::Rumour);
  CHECK(label_from_string("rumor") == Label::Rumour);
  CHECK(label_from_string("Non-Rumour") == Label::NonRumour);
  CHECK(label_from_string("nonrumour") == Label::NonRumour);
  CHECK_FALSE(label_from_string("maybe").has_value());
}

TEST_CASE("jsonl save/load round-trips threads") {
  auto path = temp_file("roundtrip.jsonl");
  std::vector<Thread> threads = make_threads(4);
  threads[2].label.reset();  // unlabeled threads are allowed
  threads[3].group = "event1";
  save_jsonl(threads, path.string());
  auto loaded = load_jsonl(path.string());

  REQUIRE(loaded.size() == threads.size());
  for (std::size_t i = 0; i < threads.size(); ++i) {
    CHECK(loaded[i].id == threads[i].id);
    CHECK(loaded[i].source_text == threads[i].source_text);
    CHECK(loaded[i].label == threads[i].label);
    CHECK(loaded[i].language == threads[i].language);
    CHECK(loaded[i].group == threads[i].group);
    REQUIRE(loaded[i].reactions.size() == 2);
  }
  // Reactions come back sorted by timestamp.
  CHECK(loaded[0].reactions[0].timestamp == 10);
  CHECK(loaded[0].reactions[1].timestamp == 20);
  fs::remove(path);
}

TEST_CASE("jsonl loader reports the offending line") {
  auto path = temp_file("malformed.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id":"a","source_text":"x","reactions":[],"language":"l"})" << "\n";
    out << "{not json}\n";
  }
  CHECK_THROWS_WITH_AS(load_jsonl(path.string()),
                       doctest::Contains("line 2"), DataError);
  fs::remove(path);
}

TEST_CASE("jsonl loader rejects duplicates and missing fields") {
  auto path = temp_file("invalid.jsonl");
  auto write = [&](const std::string& body) {
    std::ofstream out(path);
    out << body;
  };
  write(R"({"id":"a","source_text":"x","reactions":[],"language":"l"})"
        "\n"
        R"({"id":"a","source_text":"y","reactions":[],"language":"l"})"
        "\n");
  CHECK_THROWS_WITH_AS(load_jsonl(path.string()),
                       doctest::Contains("duplicate"), DataError);
  write(R"({"id":"b","reactions":[],"language":"l"})"
        "\n");
  CHECK_THROWS_AS(load_jsonl(path.string()), DataError);
  write(R"({"id":"b","source_text":"","reactions":[],"language":"l"})"
        "\n");
  CHECK_THROWS_AS(load_jsonl(path.string()), DataError);
  write(R"({"id":"b","source_text":"x","reactions":[],"language":"l","label":"perhaps"})"
        "\n");
  CHECK_THROWS_AS(load_jsonl(path.string()), DataError);
  fs::remove(path);
}

TEST_CASE("split_dataset sizes follow the rounding rule") {
  auto check_sizes = [](std::size_t n, std::size_t test, std::size_t train,
                        std::size_t val) {
    auto split = split_dataset(make_threads(n), 9);
    CHECK(split.test.size() == test);
    CHECK(split.train.size() == train);
    CHECK(split.validation.size() == val);
  };
  check_sizes(1154, 231, 738, 185);
  check_sizes(10, 2, 6, 2);
  check_sizes(100, 20, 64, 16);
}

TEST_CASE("split_dataset partitions without loss and is seed-deterministic") {
  auto threads = make_threads(57);
  auto a = split_dataset(threads, 3);
  auto b = split_dataset(threads, 3);
  auto c = split_dataset(threads, 4);

  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (const auto& t : *part) ids.insert(t.id);
  CHECK(ids.size() == threads.size());

  auto order = [](const DatasetSplit& s) {
    std::vector<std::string> o;
    for (const auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& t : *part) o.push_back(t.id);
    return o;
  };
  CHECK(order(a) == order(b));
  CHECK(order(a) != order(c));
}

TEST_CASE("split_dataset rejects tiny datasets") {
  CHECK_THROWS_AS(split_dataset(make_threads(9), 1), DataError);
}

TEST_CASE("kfold_split covers the dataset with disjoint test folds") {
  auto threads = make_threads(25);
  auto folds = kfold_split(threads, 5, 2);
  REQUIRE(folds.size() == 5);
  std::set<std::string> test_ids;
  for (const auto& fold : folds) {
    CHECK(fold.train.size() + fold.validation.size() + fold.test.size() ==
          threads.size());
    for (const auto& t : fold.test) CHECK(test_ids.insert(t.id).second);
  }
  CHECK(test_ids.size() == threads.size());
}

TEST_CASE("kfold_split keeps event groups disjoint across test folds") {
  auto threads = make_threads(24);
  for (std::size_t i = 0; i < threads.size(); ++i)
    threads[i].group = "event" + std::to_string(i / 4);
  auto folds = kfold_split(threads, 3, 2);
  for (const auto& fold : folds) {
    std::set<std::string> test_groups, train_groups;
    for (const auto& t : fold.test) test_groups.insert(t.group);
    for (const auto& t : fold.train) train_groups.insert(t.group);
    for (const auto& t : fold.validation) train_groups.insert(t.group);
    for (const auto& g : test_groups) CHECK(train_groups.count(g) == 0);
  }
}

TEST_CASE("dataset_stats counts labels and reactions") {
  auto threads = make_threads(5);
  threads[4].label.reset();
  threads[0].reactions.clear();
  auto s = dataset_stats(threads);
  CHECK(s.threads == 5);
  CHECK(s.rumours == 2);
  CHECK(s.non_rumours == 2);
  CHECK(s.unlabeled == 1);
  CHECK(s.total_reactions == 8);
  CHECK(s.min_reactions == 0);
  CHECK(s.max_reactions == 2);
  CHECK(s.avg_reactions == doctest::Approx(1.6));
  CHECK_THROWS_AS(dataset_stats({}), DataError);
}

TEST_CASE("synth_bilingual validates its configuration") {
  SynthConfig cfg;
  cfg.lexical_overlap = 1.5;
  CHECK_THROWS_AS(synth_bilingual(cfg), DataError);
  cfg.lexical_overlap = 0.3;
  cfg.label_signal_strength = 0.0;
  CHECK_THROWS_AS(synth_bilingual(cfg), DataError);
  cfg.label_signal_strength = 0.9;
  cfg.reaction_count_min = 5;
  cfg.reaction_count_max = 2;
  CHECK_THROWS_AS(synth_bilingual(cfg), DataError);
  cfg.reaction_count_min = 2;
  cfg.reaction_count_max = 5;
  cfg.vocab_size_per_language = 3;
  CHECK_THROWS_AS(synth_bilingual(cfg), DataError);
}

namespace {

std::set<std::string> corpus_words(const std::vector<Thread>& threads) {
  std::set<std::string> words;
  auto add = [&](const std::string& text) {
    std::string cur;
    for (char c : text + " ") {
      if (c == ' ') {
        if (!cur.empty()) words.insert(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
  };
  for (const auto& t : threads) {
    add(t.source_text);
    for (const auto& r : t.reactions) add(r.text);
  }
  return words;
}

}  // namespace

TEST_CASE("synth_bilingual overlap equals round(overlap * vocab)") {
  SynthConfig cfg;
  cfg.n_per_language = 400;
  cfg.vocab_size_per_language = 40;
  cfg.lexical_overlap = 0.3;
  cfg.label_signal_strength = 0.85;
  cfg.seed = 17;
  auto corpus = synth_bilingual(cfg);

  auto src_words = corpus_words(corpus.source);
  auto tgt_words = corpus_words(corpus.target);
  std::vector<std::string> shared;
  std::set_intersection(src_words.begin(), src_words.end(), tgt_words.begin(),
                        tgt_words.end(), std::back_inserter(shared));
  CHECK(shared.size() == 12);  // round(0.3 * 40)
}

TEST_CASE("synth_bilingual is balanced, bounded, and deterministic") {
  SynthConfig cfg;
  cfg.n_per_language = 100;
  cfg.vocab_size_per_language = 30;
  cfg.seed = 5;
  auto a = synth_bilingual(cfg);
  auto b = synth_bilingual(cfg);

  REQUIRE(a.source.size() == 100);
  REQUIRE(a.target.size() == 100);
  std::size_t rumours = 0;
  for (const auto& t : a.source) {
    REQUIRE(t.label.has_value());
    if (*t.label == Label::Rumour) ++rumours;
    CHECK(t.reactions.size() >= cfg.reaction_count_min);
    CHECK(t.reactions.size() <= cfg.reaction_count_max);
    CHECK(t.language == "synthA");
    CHECK_FALSE(t.source_text.empty());
  }
  CHECK(rumours == 50);
  CHECK(a.target.front().language == "synthB");

  for (std::size_t i = 0; i < a.source.size(); ++i) {
    CHECK(a.source[i].id == b.source[i].id);
    CHECK(a.source[i].source_text == b.source[i].source_text);
  }
}
