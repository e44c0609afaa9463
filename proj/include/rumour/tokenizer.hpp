#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rumour/corpus.hpp"

namespace rumour {

// Shared subword inventory. Ids are dense 0..V-1; the five specials occupy
// ids 0..4 and are never produced by merges.
struct Vocabulary {
  std::vector<std::pair<std::string, std::string>> merges;
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;
  int cls = 0;
  int sep = 1;
  int pad = 2;
  int mask = 3;
  int unk = 4;

  int size() const { return static_cast<int>(id_to_token.size()); }
  bool is_special(int id) const { return id < 5; }
};

struct TokenSequence {
  std::vector<int> ids;                 // exactly max_seq_len, PAD-filled
  int attention_len = 0;                // count of non-PAD positions
  std::vector<int> segment_boundaries;  // positions of SEP tokens
};

enum class SepStyle { Single, Double };

// Greedy byte-pair merge training over the whitespace-split words of all
// corpora. Words carry a leading U+2581 marker so decoding restores spaces.
// Frequency ties break by lexicographic pair order; fully deterministic.
Vocabulary train_subwords(const std::vector<std::vector<Thread>>& corpora,
                          std::size_t vocab_size, std::uint64_t seed);

Vocabulary train_subwords_text(const std::vector<std::string>& texts,
                               std::size_t vocab_size, std::uint64_t seed);

// [CLS] source [SEP] reactions... [SEP], reactions in timestamp order,
// truncated (whole or partial) to fit, final SEP always reserved, PAD-filled
// to max_seq_len. Double emits two SEPs between source and reactions.
TokenSequence encode_thread(const Thread& t, const Vocabulary& v,
                            std::size_t max_seq_len, SepStyle sep_style);

// Subword ids of a raw text fragment (no specials, no padding).
std::vector<int> encode_text(const std::string& text, const Vocabulary& v);

// Inverse of encode for non-special tokens: concatenates subwords and turns
// the word markers back into spaces.
std::string decode_tokens(const TokenSequence& seq, const Vocabulary& v);

struct MaskedSequence {
  TokenSequence corrupted;
  std::vector<std::pair<int, int>> targets;  // (position, original id)
};

// Each non-special, non-PAD position is masked independently with
// probability mask_prob; deterministic per seed.
MaskedSequence mask_tokens(const TokenSequence& seq, const Vocabulary& v,
                           double mask_prob, std::uint64_t seed);

void save_vocabulary(const Vocabulary& v, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace rumour
