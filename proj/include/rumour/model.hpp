#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rumour/tokenizer.hpp"

namespace rumour {

struct Dims {
  int vocab = 0;   // V
  int dim = 0;     // d
  int layers = 0;  // L
};

struct EncoderLayer {
  std::vector<double> w;  // d x d, row-major
  std::vector<double> b;  // d
};

// Embedding table, residual feed-forward encoder over the mean-pooled token
// embeddings, and a 2-way softmax head. The masked-token head is weight-tied
// to the embedding table (same storage).
struct ClassifierParams {
  Dims dims;
  std::vector<double> embeddings;  // V x d, row-major; doubles as the MLM head
  std::vector<EncoderLayer> encoder;
  std::vector<double> cls_w;  // 2 x d
  std::array<double, 2> cls_b{0.0, 0.0};
  double dropout_rate = 0.1;

  std::size_t coordinate_count() const;
  double& coordinate(std::size_t flat_index);
  const double& coordinate(std::size_t flat_index) const;
  bool all_finite() const;
  std::uint64_t content_hash() const;
};

struct ForwardTrace {
  std::vector<double> h_cls;
  std::array<double, 2> probs{0.0, 0.0};
};

struct Prediction {
  std::array<double, 2> probs{0.0, 0.0};
  Label label = Label::NonRumour;
  double confidence = 0.0;
};

ClassifierParams init_params(const Dims& dims, std::uint64_t seed);

// Mean-pools non-PAD token embeddings, applies the encoder, then softmax of
// the linear head. Dropout hits h_cls only and only in train mode.
ForwardTrace forward(const ClassifierParams& params, const TokenSequence& seq,
                     bool train_mode, std::uint64_t seed);

// -ln probs[label], probability clamped to >= 1e-12.
double loss_bce(const std::array<double, 2>& probs, Label label);

// Mean over targets of -ln softmax(E * h)[original], where h is the pooled
// encoder representation of the corrupted sequence and E the tied embedding
// table.
double loss_mlm(const ClassifierParams& params, const TokenSequence& corrupted,
                const std::vector<std::pair<int, int>>& targets);

// Ties broken toward NonRumour.
Prediction predict_one(const ClassifierParams& params,
                       const TokenSequence& seq);
std::vector<Prediction> predict(const ClassifierParams& params,
                                const std::vector<TokenSequence>& seqs);

void save_checkpoint(const ClassifierParams& params, const std::string& path);
ClassifierParams load_checkpoint(const std::string& path);

}  // namespace rumour
