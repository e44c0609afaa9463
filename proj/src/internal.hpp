#pragma once

// Shared forward-pass cache between model.cpp and train.cpp.

#include <array>
#include <vector>

#include "rumour/model.hpp"

namespace rumour::detail {

struct ForwardCache {
  std::vector<int> pooled_ids;      // non-PAD token ids (with multiplicity)
  std::vector<double> pooled;       // mean embedding, size d
  std::vector<std::vector<double>> layer_in;    // input to each layer
  std::vector<std::vector<double>> layer_tanh;  // tanh(w*x+b) per layer
  std::vector<double> encoded;      // encoder output before dropout
  std::vector<double> h;            // post-dropout representation
  std::vector<double> dropout_mask; // scale factors, empty when not training
  std::array<double, 2> probs{0.0, 0.0};
};

ForwardCache forward_cached(const ClassifierParams& params,
                            const TokenSequence& seq, bool train_mode,
                            std::uint64_t seed);

std::array<double, 2> softmax2(double a, double b);

}  // namespace rumour::detail
