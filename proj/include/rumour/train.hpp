#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rumour/model.hpp"

namespace rumour {

enum class FreezeKind { None, EmbeddingsOnly, FirstKLayers };

struct FreezePolicy {
  FreezeKind kind = FreezeKind::None;
  int k = 0;  // for FirstKLayers: freezes embeddings plus encoder layers 1..k

  static FreezePolicy none() { return {FreezeKind::None, 0}; }
  static FreezePolicy embeddings_only() { return {FreezeKind::EmbeddingsOnly, 0}; }
  static FreezePolicy first_k_layers(int k) { return {FreezeKind::FirstKLayers, k}; }

  bool embeddings_frozen() const { return kind != FreezeKind::None; }
  bool layer_frozen(int layer_index) const {
    return kind == FreezeKind::FirstKLayers && layer_index < k;
  }
};

struct TrainConfig {
  double learning_rate = 2e-5;
  int epochs = 3;
  int batch_size = 16;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  FreezePolicy freeze = FreezePolicy::none();
};

using LabeledSeq = std::pair<TokenSequence, Label>;

// Mini-batch Adam (beta1=0.9, beta2=0.999, eps=1e-8) on binary cross-entropy.
// Frozen parameter groups are bit-identical before and after. Per-epoch
// shuffling is deterministic per cfg.seed. NaN loss aborts with the batch
// index in the message.
ClassifierParams train_supervised(ClassifierParams params,
                                  const std::vector<LabeledSeq>& data,
                                  const TrainConfig& cfg);

// Masked-token pretraining; the classification head is untouched.
ClassifierParams adaptive_pretrain(ClassifierParams params,
                                   const std::vector<TokenSequence>& unlabeled,
                                   const Vocabulary& vocab,
                                   const TrainConfig& cfg,
                                   double mask_prob = 0.15);

// Mean MLM loss over a held-out set with a fixed masking seed.
double mlm_eval_loss(const ClassifierParams& params,
                     const std::vector<TokenSequence>& seqs,
                     const Vocabulary& vocab, double mask_prob,
                     std::uint64_t seed);

// Analytic gradient of loss_bce(forward(.)) for one example, with the given
// freeze policy applied (frozen coordinates are exactly zero).
std::vector<double> supervised_gradient(const ClassifierParams& params,
                                        const TokenSequence& seq, Label label,
                                        const FreezePolicy& freeze);

// Central finite differences (h=1e-5) on >= n_samples coordinates sampled
// across every parameter group; returns the max relative error. Frozen
// coordinates are checked against zero instead.
double grad_check(const ClassifierParams& params, const TokenSequence& seq,
                  Label label, const FreezePolicy& freeze, std::uint64_t seed,
                  std::size_t n_samples = 200);

}  // namespace rumour
