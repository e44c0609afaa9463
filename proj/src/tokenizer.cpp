#include "rumour/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "rumour/errors.hpp"
#include "rumour/rng.hpp"

namespace rumour {

namespace {

constexpr const char* kWordMarker = "\xE2\x96\x81";  // U+2581
const char* const kSpecialNames[5] = {"<CLS>", "<SEP>", "<PAD>", "<MASK>", "<UNK>"};

std::vector<std::string> split_utf8(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if ((c & 0x80) == 0x00) len = 1;
    else if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// A word as its current symbol sequence: marker symbol, then code points.
std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  symbols.push_back(kWordMarker);
  for (auto& cp : split_utf8(word)) symbols.push_back(cp);
  return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& a,
                 const std::string& b) {
  std::vector<std::string> merged;
  merged.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      merged.push_back(a + b);
      ++i;
    } else {
      merged.push_back(symbols[i]);
    }
  }
  symbols = std::move(merged);
}

Vocabulary finalize_vocab(std::vector<std::pair<std::string, std::string>> merges,
                          const std::vector<std::string>& initial_symbols) {
  Vocabulary v;
  v.merges = std::move(merges);
  for (int i = 0; i < 5; ++i) {
    v.id_to_token.emplace_back(kSpecialNames[i]);
    v.token_to_id[kSpecialNames[i]] = i;
  }
  for (const auto& s : initial_symbols) {
    v.token_to_id[s] = static_cast<int>(v.id_to_token.size());
    v.id_to_token.push_back(s);
  }
  for (const auto& [a, b] : v.merges) {
    std::string t = a + b;
    if (!v.token_to_id.count(t)) {
      v.token_to_id[t] = static_cast<int>(v.id_to_token.size());
      v.id_to_token.push_back(t);
    }
  }
  return v;
}

}  // namespace

Vocabulary train_subwords_text(const std::vector<std::string>& texts,
                               std::size_t vocab_size, std::uint64_t /*seed*/) {
  // Word frequencies over the whole corpus. std::map keeps ordering stable.
  std::map<std::string, std::size_t> word_freq;
  for (const auto& text : texts)
    for (auto& w : split_words(text)) ++word_freq[w];
  if (word_freq.empty()) throw DataError("train_subwords: empty corpora");

  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  std::map<std::string, std::size_t> initial;
  for (const auto& [w, freq] : word_freq) {
    auto symbols = word_symbols(w);
    for (const auto& s : symbols) initial[s] += freq;
    words.emplace_back(std::move(symbols), freq);
  }

  std::vector<std::string> initial_symbols;
  for (const auto& [s, freq] : initial) initial_symbols.push_back(s);

  const std::size_t base = 5 + initial_symbols.size();
  if (vocab_size <= base) {
    std::ostringstream os;
    os << "vocab_size " << vocab_size << " too small: need > " << base
       << " (5 specials + " << initial_symbols.size() << " characters)";
    throw DataError(os.str());
  }

  std::vector<std::pair<std::string, std::string>> merges;
  while (5 + initial_symbols.size() + merges.size() < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_freq;
    for (const auto& [symbols, freq] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i)
        pair_freq[{symbols[i], symbols[i + 1]}] += freq;
    if (pair_freq.empty()) break;
    // Max frequency, ties by lexicographic pair order (map iteration order).
    auto best = pair_freq.begin();
    for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it)
      if (it->second > best->second) best = it;
    merges.push_back(best->first);
    for (auto& [symbols, freq] : words)
      apply_merge(symbols, best->first.first, best->first.second);
  }

  return finalize_vocab(std::move(merges), initial_symbols);
}

Vocabulary train_subwords(const std::vector<std::vector<Thread>>& corpora,
                          std::size_t vocab_size, std::uint64_t seed) {
  std::vector<std::string> texts;
  for (const auto& corpus : corpora) {
    for (const auto& t : corpus) {
      texts.push_back(t.source_text);
      for (const auto& r : t.reactions) texts.push_back(r.text);
    }
  }
  return train_subwords_text(texts, vocab_size, seed);
}

std::vector<int> encode_text(const std::string& text, const Vocabulary& v) {
  // Merge ranks for greedy lowest-rank-first application.
  std::map<std::pair<std::string, std::string>, std::size_t> rank;
  for (std::size_t i = 0; i < v.merges.size(); ++i) rank.emplace(v.merges[i], i);

  std::vector<int> ids;
  for (auto& word : split_words(text)) {
    auto symbols = word_symbols(word);
    while (symbols.size() > 1) {
      std::size_t best_rank = v.merges.size();
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        auto it = rank.find({symbols[i], symbols[i + 1]});
        if (it != rank.end() && it->second < best_rank) best_rank = it->second;
      }
      if (best_rank == v.merges.size()) break;
      apply_merge(symbols, v.merges[best_rank].first, v.merges[best_rank].second);
    }
    for (const auto& s : symbols) {
      auto it = v.token_to_id.find(s);
      ids.push_back(it == v.token_to_id.end() ? v.unk : it->second);
    }
  }
  return ids;
}

TokenSequence encode_thread(const Thread& t, const Vocabulary& v,
                            std::size_t max_seq_len, SepStyle sep_style) {
  if (max_seq_len < 8) throw DataError("max_seq_len must be >= 8");
  const std::size_t n_mid = sep_style == SepStyle::Double ? 2 : 1;

  std::vector<int> src = encode_text(t.source_text, v);
  const std::size_t cap_src = max_seq_len - 1 - n_mid - 1;
  if (src.size() > cap_src) src.resize(cap_src);

  std::size_t budget = max_seq_len - 1 - src.size() - n_mid - 1;
  std::vector<int> reacts;
  for (const auto& r : t.reactions) {  // already timestamp-sorted
    if (budget == 0) break;
    for (int id : encode_text(r.text, v)) {
      if (budget == 0) break;
      reacts.push_back(id);
      --budget;
    }
  }

  TokenSequence seq;
  seq.ids.reserve(max_seq_len);
  seq.ids.push_back(v.cls);
  seq.ids.insert(seq.ids.end(), src.begin(), src.end());
  for (std::size_t i = 0; i < n_mid; ++i) seq.ids.push_back(v.sep);
  seq.ids.insert(seq.ids.end(), reacts.begin(), reacts.end());
  seq.ids.push_back(v.sep);
  seq.attention_len = static_cast<int>(seq.ids.size());
  seq.ids.resize(max_seq_len, v.pad);
  for (int i = 0; i < seq.attention_len; ++i)
    if (seq.ids[static_cast<std::size_t>(i)] == v.sep) seq.segment_boundaries.push_back(i);
  return seq;
}

std::string decode_tokens(const TokenSequence& seq, const Vocabulary& v) {
  std::string joined;
  for (int i = 0; i < seq.attention_len; ++i) {
    int id = seq.ids[static_cast<std::size_t>(i)];
    if (v.is_special(id)) continue;
    joined += v.id_to_token[static_cast<std::size_t>(id)];
  }
  // Turn word markers back into spaces.
  std::string out;
  std::size_t i = 0;
  const std::string marker = kWordMarker;
  while (i < joined.size()) {
    if (joined.compare(i, marker.size(), marker) == 0) {
      if (!out.empty()) out.push_back(' ');
      i += marker.size();
    } else {
      out.push_back(joined[i]);
      ++i;
    }
  }
  return out;
}

MaskedSequence mask_tokens(const TokenSequence& seq, const Vocabulary& v,
                           double mask_prob, std::uint64_t seed) {
  if (mask_prob <= 0.0 || mask_prob >= 1.0)
    throw DataError("mask_prob must be in (0, 1)");
  MaskedSequence out;
  out.corrupted = seq;
  Rng rng(seed);
  for (int pos = 0; pos < seq.attention_len; ++pos) {
    int id = seq.ids[static_cast<std::size_t>(pos)];
    if (v.is_special(id)) continue;
    if (rng.bernoulli(mask_prob)) {
      out.targets.emplace_back(pos, id);
      out.corrupted.ids[static_cast<std::size_t>(pos)] = v.mask;
    }
  }
  return out;
}

void save_vocabulary(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  out << "rumour-vocab v1\n";
  out << "merges " << v.merges.size() << "\n";
  for (const auto& [a, b] : v.merges) out << a << " " << b << "\n";
  out << "tokens " << v.id_to_token.size() << "\n";
  for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
    out << i << " " << v.id_to_token[i] << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "rumour-vocab v1")
    throw DataError("unrecognized vocabulary header in " + path);
  Vocabulary v;
  std::string word;
  std::size_t n = 0;
  in >> word >> n;
  if (word != "merges") throw DataError("bad vocabulary file: " + path);
  for (std::size_t i = 0; i < n; ++i) {
    std::string a, b;
    in >> a >> b;
    v.merges.emplace_back(a, b);
  }
  in >> word >> n;
  if (word != "tokens") throw DataError("bad vocabulary file: " + path);
  v.id_to_token.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t id;
    std::string tok;
    in >> id >> tok;
    if (id != i) throw DataError("non-dense token ids in " + path);
    v.id_to_token.push_back(tok);
    v.token_to_id[tok] = static_cast<int>(i);
  }
  if (!in) throw DataError("truncated vocabulary file: " + path);
  return v;
}

}  // namespace rumour
