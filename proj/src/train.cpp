#include "rumour/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"
#include "rumour/errors.hpp"
#include "rumour/rng.hpp"

namespace rumour {

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

// Flat coordinate layout mirrors ClassifierParams::coordinate.
struct Layout {
  std::size_t emb_size = 0;
  std::size_t layer_w = 0;
  std::size_t layer_b = 0;
  std::size_t n_layers = 0;
  std::size_t cls_w = 0;
  std::size_t total = 0;

  explicit Layout(const ClassifierParams& p)
      : emb_size(p.embeddings.size()),
        layer_w(static_cast<std::size_t>(p.dims.dim) * p.dims.dim),
        layer_b(static_cast<std::size_t>(p.dims.dim)),
        n_layers(static_cast<std::size_t>(p.dims.layers)),
        cls_w(p.cls_w.size()),
        total(p.coordinate_count()) {}

  std::size_t layer_offset(std::size_t l) const {
    return emb_size + l * (layer_w + layer_b);
  }
  std::size_t cls_offset() const { return layer_offset(n_layers); }

  bool frozen(std::size_t idx, const FreezePolicy& freeze) const {
    if (idx < emb_size) return freeze.embeddings_frozen();
    if (idx < cls_offset()) {
      std::size_t l = (idx - emb_size) / (layer_w + layer_b);
      return freeze.layer_frozen(static_cast<int>(l));
    }
    return false;
  }
};

void accumulate_layer_backward(const ClassifierParams& params,
                               const std::vector<std::vector<double>>& layer_in,
                               const std::vector<std::vector<double>>& layer_tanh,
                               std::vector<double>& dx, const Layout& layout,
                               std::vector<double>& grad, double scale) {
  const int d = params.dims.dim;
  for (std::size_t l = layout.n_layers; l-- > 0;) {
    const auto& layer = params.encoder[l];
    const auto& in = layer_in[l];
    const auto& th = layer_tanh[l];
    std::vector<double> dz(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      dz[static_cast<std::size_t>(i)] =
          dx[static_cast<std::size_t>(i)] *
          (1.0 - th[static_cast<std::size_t>(i)] * th[static_cast<std::size_t>(i)]);
    double* gw = grad.data() + layout.layer_offset(l);
    double* gb = gw + layout.layer_w;
    std::vector<double> din = dx;  // residual path
    for (int i = 0; i < d; ++i) {
      const double dzi = dz[static_cast<std::size_t>(i)];
      const double* wrow = layer.w.data() + static_cast<std::size_t>(i) * d;
      double* gwrow = gw + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) {
        gwrow[j] += scale * dzi * in[static_cast<std::size_t>(j)];
        din[static_cast<std::size_t>(j)] += dzi * wrow[j];
      }
      gb[i] += scale * dzi;
    }
    dx = std::move(din);
  }
}

// Adds the gradient of loss_bce(forward(seq)) to grad (scaled); returns loss.
double accumulate_supervised_gradient(const ClassifierParams& params,
                                      const TokenSequence& seq, Label label,
                                      bool train_mode, std::uint64_t dropout_seed,
                                      const Layout& layout,
                                      std::vector<double>& grad, double scale) {
  const int d = params.dims.dim;
  auto cache = detail::forward_cached(params, seq, train_mode, dropout_seed);
  const double p_label = cache.probs[static_cast<std::size_t>(label)];
  const double loss = -std::log(std::max(p_label, 1e-12));
  if (p_label < 1e-12) return loss;  // clamped region, zero gradient

  std::array<double, 2> dlogits = cache.probs;
  dlogits[static_cast<std::size_t>(label)] -= 1.0;

  double* g_cls_w = grad.data() + layout.cls_offset();
  double* g_cls_b = g_cls_w + layout.cls_w;
  std::vector<double> dh(static_cast<std::size_t>(d), 0.0);
  for (int c = 0; c < 2; ++c) {
    g_cls_b[c] += scale * dlogits[static_cast<std::size_t>(c)];
    for (int j = 0; j < d; ++j) {
      g_cls_w[static_cast<std::size_t>(c) * d + j] +=
          scale * dlogits[static_cast<std::size_t>(c)] * cache.h[static_cast<std::size_t>(j)];
      dh[static_cast<std::size_t>(j)] +=
          dlogits[static_cast<std::size_t>(c)] *
          params.cls_w[static_cast<std::size_t>(c) * d + j];
    }
  }
  if (!cache.dropout_mask.empty())
    for (int j = 0; j < d; ++j)
      dh[static_cast<std::size_t>(j)] *= cache.dropout_mask[static_cast<std::size_t>(j)];

  accumulate_layer_backward(params, cache.layer_in, cache.layer_tanh, dh, layout,
                            grad, scale);

  const double inv_n = 1.0 / static_cast<double>(cache.pooled_ids.size());
  for (int id : cache.pooled_ids) {
    double* ge = grad.data() + static_cast<std::size_t>(id) * d;
    for (int j = 0; j < d; ++j)
      ge[j] += scale * inv_n * dh[static_cast<std::size_t>(j)];
  }
  return loss;
}

// Gradient of loss_mlm for one corrupted sequence; returns loss. Masked
// tokens are predicted from the pooled encoder representation, tied against
// the embedding table, so gradients flow into both sides of the tie.
double accumulate_mlm_gradient(const ClassifierParams& params,
                               const TokenSequence& corrupted,
                               const std::vector<std::pair<int, int>>& targets,
                               const Layout& layout, std::vector<double>& grad,
                               double scale) {
  const int d = params.dims.dim;
  const int v = params.dims.vocab;
  auto cache = detail::forward_cached(params, corrupted, false, 0);

  std::vector<double> logits(static_cast<std::size_t>(v));
  double max_logit = -1e300;
  for (int t = 0; t < v; ++t) {
    const double* row = params.embeddings.data() + static_cast<std::size_t>(t) * d;
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += row[j] * cache.encoded[static_cast<std::size_t>(j)];
    logits[static_cast<std::size_t>(t)] = z;
    max_logit = std::max(max_logit, z);
  }
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - max_logit);
  const double log_denom = std::log(denom) + max_logit;

  const double inv_t = 1.0 / static_cast<double>(targets.size());
  double loss = 0.0;
  std::vector<double> dlogits(static_cast<std::size_t>(v));
  for (int t = 0; t < v; ++t)
    dlogits[static_cast<std::size_t>(t)] = std::exp(logits[static_cast<std::size_t>(t)] - log_denom);
  for (const auto& [pos, original] : targets) {
    loss += -(logits[static_cast<std::size_t>(original)] - log_denom);
    dlogits[static_cast<std::size_t>(original)] -= inv_t;
  }
  loss *= inv_t;

  // Output side of the tie: score rows of the embedding table.
  std::vector<double> dh(static_cast<std::size_t>(d), 0.0);
  for (int t = 0; t < v; ++t) {
    const double dl = dlogits[static_cast<std::size_t>(t)];
    const double* row = params.embeddings.data() + static_cast<std::size_t>(t) * d;
    double* ge = grad.data() + static_cast<std::size_t>(t) * d;
    for (int j = 0; j < d; ++j) {
      ge[j] += scale * dl * cache.encoded[static_cast<std::size_t>(j)];
      dh[static_cast<std::size_t>(j)] += dl * row[j];
    }
  }

  // Input side: back through the encoder into the pooled embeddings.
  accumulate_layer_backward(params, cache.layer_in, cache.layer_tanh, dh, layout,
                            grad, scale);
  const double inv_n = 1.0 / static_cast<double>(cache.pooled_ids.size());
  for (int id : cache.pooled_ids) {
    double* ge = grad.data() + static_cast<std::size_t>(id) * d;
    for (int j = 0; j < d; ++j) ge[j] += scale * inv_n * dh[static_cast<std::size_t>(j)];
  }
  return loss;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(ClassifierParams& params, const std::vector<double>& grad,
            double lr, const Layout& layout, const FreezePolicy& freeze) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (layout.frozen(i, freeze)) continue;
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      params.coordinate(i) -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace

std::vector<double> supervised_gradient(const ClassifierParams& params,
                                        const TokenSequence& seq, Label label,
                                        const FreezePolicy& freeze) {
  Layout layout(params);
  std::vector<double> grad(layout.total, 0.0);
  accumulate_supervised_gradient(params, seq, label, false, 0, layout, grad, 1.0);
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (layout.frozen(i, freeze)) grad[i] = 0.0;
  return grad;
}

ClassifierParams train_supervised(ClassifierParams params,
                                  const std::vector<LabeledSeq>& data,
                                  const TrainConfig& cfg) {
  if (data.empty()) throw TrainError("train_supervised: empty data");
  if (cfg.batch_size < 1) throw TrainError("train_supervised: batch_size < 1");
  params.dropout_rate = cfg.dropout;
  Layout layout(params);
  AdamState adam(layout.total);
  Rng shuffle_rng(cfg.seed);
  std::vector<double> grad(layout.total, 0.0);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(end - start);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& [seq, label] = data[order[i]];
        std::uint64_t drop_seed =
            mix64(cfg.seed, mix64(static_cast<std::uint64_t>(epoch), order[i]));
        batch_loss += scale * accumulate_supervised_gradient(
                                  params, seq, label, cfg.dropout > 0.0,
                                  drop_seed, layout, grad, scale);
      }
      if (std::isnan(batch_loss)) {
        std::ostringstream os;
        os << "NaN loss in epoch " << epoch << ", batch " << batch_index;
        throw TrainError(os.str());
      }
      adam.step(params, grad, cfg.learning_rate, layout, cfg.freeze);
    }
  }
  return params;
}

ClassifierParams adaptive_pretrain(ClassifierParams params,
                                   const std::vector<TokenSequence>& unlabeled,
                                   const Vocabulary& vocab,
                                   const TrainConfig& cfg, double mask_prob) {
  if (unlabeled.empty()) throw TrainError("adaptive_pretrain: empty unlabeled set");
  Layout layout(params);
  AdamState adam(layout.total);
  Rng shuffle_rng(cfg.seed);
  std::vector<double> grad(layout.total, 0.0);

  std::vector<std::size_t> order(unlabeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      std::size_t used = 0;
      for (std::size_t i = start; i < end; ++i) {
        std::uint64_t mask_seed =
            mix64(cfg.seed ^ 0x4d4c4dULL, mix64(static_cast<std::uint64_t>(epoch), order[i]));
        auto masked = mask_tokens(unlabeled[order[i]], vocab, mask_prob, mask_seed);
        if (masked.targets.empty()) continue;
        ++used;
        batch_loss += accumulate_mlm_gradient(params, masked.corrupted,
                                              masked.targets, layout, grad, 1.0);
      }
      if (used == 0) continue;
      const double scale = 1.0 / static_cast<double>(used);
      for (double& g : grad) g *= scale;
      batch_loss *= scale;
      if (std::isnan(batch_loss)) {
        std::ostringstream os;
        os << "NaN masked-token loss in epoch " << epoch << ", batch " << batch_index;
        throw TrainError(os.str());
      }
      adam.step(params, grad, cfg.learning_rate, layout, cfg.freeze);
    }
  }
  return params;
}

double mlm_eval_loss(const ClassifierParams& params,
                     const std::vector<TokenSequence>& seqs,
                     const Vocabulary& vocab, double mask_prob,
                     std::uint64_t seed) {
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto masked = mask_tokens(seqs[i], vocab, mask_prob, mix64(seed, i));
    if (masked.targets.empty()) continue;
    total += loss_mlm(params, masked.corrupted, masked.targets);
    ++used;
  }
  if (used == 0) throw DataError("mlm_eval_loss: no maskable sequences");
  return total / static_cast<double>(used);
}

double grad_check(const ClassifierParams& params, const TokenSequence& seq,
                  Label label, const FreezePolicy& freeze, std::uint64_t seed,
                  std::size_t n_samples) {
  Layout layout(params);
  std::vector<double> analytic = supervised_gradient(params, seq, label, freeze);

  // Group boundaries so sampling spans embeddings, every layer, and the head.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  groups.emplace_back(0, layout.emb_size);
  for (std::size_t l = 0; l < layout.n_layers; ++l) {
    groups.emplace_back(layout.layer_offset(l), layout.layer_w);
    groups.emplace_back(layout.layer_offset(l) + layout.layer_w, layout.layer_b);
  }
  groups.emplace_back(layout.cls_offset(), layout.cls_w);
  groups.emplace_back(layout.cls_offset() + layout.cls_w, 2);

  Rng rng(seed);
  ClassifierParams work = params;
  constexpr double h = 1e-5;
  double max_err = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto& [offset, size] = groups[s % groups.size()];
    const std::size_t idx = offset + static_cast<std::size_t>(rng.below(size));
    const double ga = analytic[idx];
    if (layout.frozen(idx, freeze)) {
      max_err = std::max(max_err, std::abs(ga));  // must be exactly zero
      continue;
    }
    const double saved = work.coordinate(idx);
    work.coordinate(idx) = saved + h;
    const double lp = loss_bce(forward(work, seq, false, 0).probs, label);
    work.coordinate(idx) = saved - h;
    const double lm = loss_bce(forward(work, seq, false, 0).probs, label);
    work.coordinate(idx) = saved;
    const double gf = (lp - lm) / (2.0 * h);
    // Relative error with an absolute floor so unused coordinates (both
    // gradients ~0) do not amplify finite-difference noise.
    const double err = std::abs(ga - gf) / std::max({1e-4, std::abs(ga), std::abs(gf)});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace rumour
