#include "rumour/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "internal.hpp"
#include "rumour/errors.hpp"
#include "rumour/rng.hpp"

namespace rumour {

namespace detail {

std::array<double, 2> softmax2(double a, double b) {
  double m = std::max(a, b);
  double ea = std::exp(a - m), eb = std::exp(b - m);
  double z = ea + eb;
  return {ea / z, eb / z};
}

ForwardCache forward_cached(const ClassifierParams& params,
                            const TokenSequence& seq, bool train_mode,
                            std::uint64_t seed) {
  const int d = params.dims.dim;
  const int v = params.dims.vocab;
  ForwardCache cache;
  cache.pooled.assign(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < seq.attention_len; ++i) {
    int id = seq.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= v) throw DataError("token id out of range: " + std::to_string(id));
    cache.pooled_ids.push_back(id);
    const double* row = params.embeddings.data() + static_cast<std::size_t>(id) * d;
    for (int j = 0; j < d; ++j) cache.pooled[static_cast<std::size_t>(j)] += row[j];
  }
  if (cache.pooled_ids.empty()) throw DataError("empty token sequence");
  const double inv_n = 1.0 / static_cast<double>(cache.pooled_ids.size());
  for (double& x : cache.pooled) x *= inv_n;

  std::vector<double> x = cache.pooled;
  for (const auto& layer : params.encoder) {
    cache.layer_in.push_back(x);
    std::vector<double> t(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      double z = layer.b[static_cast<std::size_t>(i)];
      const double* row = layer.w.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
      t[static_cast<std::size_t>(i)] = std::tanh(z);
    }
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] += t[static_cast<std::size_t>(i)];
    cache.layer_tanh.push_back(std::move(t));
  }
  cache.encoded = x;

  cache.h = x;
  if (train_mode && params.dropout_rate > 0.0) {
    Rng rng(seed);
    cache.dropout_mask.assign(static_cast<std::size_t>(d), 0.0);
    const double keep = 1.0 - params.dropout_rate;
    for (int i = 0; i < d; ++i) {
      double scale = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
      cache.dropout_mask[static_cast<std::size_t>(i)] = scale;
      cache.h[static_cast<std::size_t>(i)] *= scale;
    }
  }

  double logit0 = params.cls_b[0], logit1 = params.cls_b[1];
  for (int j = 0; j < d; ++j) {
    logit0 += params.cls_w[static_cast<std::size_t>(j)] * cache.h[static_cast<std::size_t>(j)];
    logit1 += params.cls_w[static_cast<std::size_t>(d + j)] * cache.h[static_cast<std::size_t>(j)];
  }
  cache.probs = softmax2(logit0, logit1);
  return cache;
}

}  // namespace detail

std::size_t ClassifierParams::coordinate_count() const {
  std::size_t n = embeddings.size();
  for (const auto& l : encoder) n += l.w.size() + l.b.size();
  return n + cls_w.size() + cls_b.size();
}

namespace {

template <class Params, class Double>
Double& coordinate_impl(Params& p, std::size_t idx) {
  if (idx < p.embeddings.size()) return p.embeddings[idx];
  idx -= p.embeddings.size();
  for (auto& l : p.encoder) {
    if (idx < l.w.size()) return l.w[idx];
    idx -= l.w.size();
    if (idx < l.b.size()) return l.b[idx];
    idx -= l.b.size();
  }
  if (idx < p.cls_w.size()) return p.cls_w[idx];
  idx -= p.cls_w.size();
  return p.cls_b[idx];
}

}  // namespace

double& ClassifierParams::coordinate(std::size_t idx) {
  return coordinate_impl<ClassifierParams, double>(*this, idx);
}

const double& ClassifierParams::coordinate(std::size_t idx) const {
  return coordinate_impl<const ClassifierParams, const double>(*this, idx);
}

bool ClassifierParams::all_finite() const {
  const std::size_t n = coordinate_count();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(coordinate(i))) return false;
  return true;
}

std::uint64_t ClassifierParams::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over raw bytes
  auto mix = [&h](const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::size_t n = coordinate_count();
  for (std::size_t i = 0; i < n; ++i) {
    double x = coordinate(i);
    mix(&x, sizeof(x));
  }
  return h;
}

ClassifierParams init_params(const Dims& dims, std::uint64_t seed) {
  if (dims.vocab < 1 || dims.dim < 1 || dims.layers < 1)
    throw DataError("init_params: dims must all be >= 1");
  ClassifierParams p;
  p.dims = dims;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.dim));
  auto draw = [&] { return rng.uniform(-bound, bound); };
  p.embeddings.resize(static_cast<std::size_t>(dims.vocab) * dims.dim);
  for (double& x : p.embeddings) x = draw();
  p.encoder.resize(static_cast<std::size_t>(dims.layers));
  for (auto& l : p.encoder) {
    l.w.resize(static_cast<std::size_t>(dims.dim) * dims.dim);
    for (double& x : l.w) x = draw();
    l.b.assign(static_cast<std::size_t>(dims.dim), 0.0);
  }
  p.cls_w.resize(2 * static_cast<std::size_t>(dims.dim));
  for (double& x : p.cls_w) x = draw();
  p.cls_b = {0.0, 0.0};
  return p;
}

ForwardTrace forward(const ClassifierParams& params, const TokenSequence& seq,
                     bool train_mode, std::uint64_t seed) {
  auto cache = detail::forward_cached(params, seq, train_mode, seed);
  ForwardTrace trace;
  trace.h_cls = std::move(cache.encoded);
  trace.probs = cache.probs;
  return trace;
}

double loss_bce(const std::array<double, 2>& probs, Label label) {
  double p = probs[static_cast<std::size_t>(label)];
  return -std::log(std::max(p, 1e-12));
}

double loss_mlm(const ClassifierParams& params, const TokenSequence& corrupted,
                const std::vector<std::pair<int, int>>& targets) {
  if (targets.empty()) throw DataError("loss_mlm: empty target set");
  const int d = params.dims.dim;
  const int v = params.dims.vocab;
  // Masked tokens are predicted from the pooled encoder representation of
  // the corrupted sequence, scored against the tied embedding table. One
  // representation serves every masked position of the sequence.
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

  double total = 0.0;
  for (const auto& [pos, original] : targets) {
    double logp = logits[static_cast<std::size_t>(original)] - log_denom;
    total += -std::max(logp, std::log(1e-12));
  }
  return total / static_cast<double>(targets.size());
}

Prediction predict_one(const ClassifierParams& params, const TokenSequence& seq) {
  auto trace = forward(params, seq, false, 0);
  Prediction pred;
  pred.probs = trace.probs;
  // Ties go to NonRumour (index 0).
  pred.label = trace.probs[1] > trace.probs[0] ? Label::Rumour : Label::NonRumour;
  pred.confidence = std::max(trace.probs[0], trace.probs[1]);
  return pred;
}

std::vector<Prediction> predict(const ClassifierParams& params,
                                const std::vector<TokenSequence>& seqs) {
  std::vector<Prediction> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(predict_one(params, s));
  return out;
}

namespace {
constexpr char kCheckpointMagic[] = "RMDL0001";
}

void save_checkpoint(const ClassifierParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  std::int32_t header[3] = {params.dims.vocab, params.dims.dim, params.dims.layers};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(&params.dropout_rate), sizeof(double));
  const std::size_t n = params.coordinate_count();
  for (std::size_t i = 0; i < n; ++i) {
    double x = params.coordinate(i);
    out.write(reinterpret_cast<const char*>(&x), sizeof(double));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

ClassifierParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError("unrecognized checkpoint format: " + path);
  std::int32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  double dropout = 0.0;
  in.read(reinterpret_cast<char*>(&dropout), sizeof(double));
  ClassifierParams p = init_params({header[0], header[1], header[2]}, 0);
  p.dropout_rate = dropout;
  const std::size_t n = p.coordinate_count();
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    in.read(reinterpret_cast<char*>(&x), sizeof(double));
    p.coordinate(i) = x;
  }
  if (!in) throw DataError("truncated checkpoint: " + path);
  return p;
}

}  // namespace rumour
