#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "awm/corpus.hpp"
#include "awm/embedder.hpp"
#include "awm/errors.hpp"
#include "awm/mapper.hpp"
#include "awm/rng.hpp"

namespace awm {

struct AugmentRates {
  double substitute = 0.1;
  double erase = 0.1;
  double insert = 0.1;
};

// Edit-based stand-in for a paraphraser: nearest-neighbor substitutions,
// random deletions, unigram-sampled insertions. Never empties the sequence.
class Augmenter {
 public:
  Augmenter(const SentenceEmbedder& embedder, const Corpus& corpus)
      : embedder_(&embedder), unigram_cum_(embedder.vocab_size(), 0.0) {
    std::vector<double> counts(embedder.vocab_size(), 0.0);
    for (const auto& doc : corpus.docs)
      for (TokenId t : doc) {
        if (t >= counts.size()) throw MismatchError("corpus token outside embedder vocabulary");
        counts[t] += 1.0;
      }
    double total = 0.0;
    for (double c : counts) total += c;
    double cum = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
      cum += counts[i] / total;
      unigram_cum_[i] = cum;
    }
    unigram_cum_.back() = 1.0;
  }

  TokenId sample_unigram(Rng& rng) const {
    const double x = rng.uniform();
    const auto it = std::upper_bound(unigram_cum_.begin(), unigram_cum_.end(), x);
    const size_t i = std::min<size_t>(it - unigram_cum_.begin(), unigram_cum_.size() - 1);
    return static_cast<TokenId>(i);
  }

  std::vector<TokenId> apply(std::span<const TokenId> tokens, const AugmentRates& rates,
                             Rng& rng) const {
    if (tokens.empty()) throw IoError("cannot augment an empty sequence");
    std::vector<TokenId> cur(tokens.begin(), tokens.end());
    for (auto& t : cur)
      if (rates.substitute > 0.0 && rng.uniform() < rates.substitute)
        t = embedder_->nearest_token(t);
    if (rates.erase > 0.0) {
      std::vector<TokenId> kept;
      kept.reserve(cur.size());
      for (TokenId t : cur)
        if (!(rng.uniform() < rates.erase)) kept.push_back(t);
      // Deletion may not empty the sequence: keep one surviving token.
      if (kept.empty()) kept.push_back(cur[rng.uniform_index(cur.size())]);
      cur = std::move(kept);
    }
    if (rates.insert > 0.0) {
      std::vector<TokenId> out;
      out.reserve(cur.size() + 4);
      for (TokenId t : cur) {
        out.push_back(t);
        if (rng.uniform() < rates.insert) out.push_back(sample_unigram(rng));
      }
      cur = std::move(out);
    }
    return cur;
  }

 private:
  const SentenceEmbedder* embedder_;
  std::vector<double> unigram_cum_;
};

struct LossWeights {
  double smooth = 1.0;
  double balance = 1.0;
  double token_bias = 1.0;
  double contrastive = 1.0;
};

struct LossBreakdown {
  double smooth = 0.0;
  double balance = 0.0;
  double token_bias = 0.0;
  double contrastive = 0.0;
  double total() const { return smooth + balance + token_bias + contrastive; }
};

// One training batch, already embedded: u[i] is a batch sentence, u_aug[i]
// its augmented twin, pairs the sampled index pairs for the smoothness term.
struct LossBatch {
  std::vector<std::vector<double>> u;
  std::vector<std::vector<double>> u_aug;
  std::vector<std::pair<size_t, size_t>> pairs;
};

// Four-term objective over a batch, each term averaged over its own index
// set (pairs / sentences / tokens / twin pairs):
//   smooth:      |T(D(u_i, u_j)) - D(v_i, v_j)|        for sampled pairs
//   balance:     |sum_k tanh(v_k / tau)|               per sentence
//   token_bias:  |sum_b tanh(v_{b,k} / tau)|           per token k
//   contrastive: D(v(S), v(S~))                        per twin pair
// tanh(x/tau) stands in for the hard sign during optimization; reported
// balance metrics use the hard sign. When `grad` is non-null the analytic
// gradient (same layout as mapper params) is accumulated into it.
inline LossBreakdown mapper_loss(const SemanticMapper& m, const LossBatch& batch,
                                 const LossWeights& w, double tau,
                                 std::vector<double>* grad) {
  const size_t b_count = batch.u.size();
  if (b_count < 2) throw IoError("loss needs a batch of at least 2 sentences");
  if (!batch.u_aug.empty() && batch.u_aug.size() != b_count)
    throw IoError("augmented batch size mismatch");
  if (!(tau > 0.0)) throw IoError("sign temperature must be > 0");
  const size_t vdim = m.out_dim();

  std::vector<MapperCache> caches(b_count);
  std::vector<MapperCache> aug_caches(batch.u_aug.size());
  for (size_t b = 0; b < b_count; ++b) m.forward_cached(batch.u[b], caches[b]);
  for (size_t b = 0; b < aug_caches.size(); ++b)
    m.forward_cached(batch.u_aug[b], aug_caches[b]);

  // d(loss)/dv per forward, filled term by term, then one backward each.
  std::vector<std::vector<double>> gv(b_count, std::vector<double>(vdim, 0.0));
  std::vector<std::vector<double>> gv_aug(aug_caches.size(), std::vector<double>(vdim, 0.0));

  LossBreakdown out;

  if (!batch.pairs.empty() && w.smooth != 0.0) {
    const double scale = w.smooth / static_cast<double>(batch.pairs.size());
    for (const auto& [i, j] : batch.pairs) {
      const double target = rescale_distance(euclidean(batch.u[i], batch.u[j]), m.bounds());
      const auto& vi = caches[i].v;
      const auto& vj = caches[j].v;
      const double d = euclidean(vi, vj);
      out.smooth += scale * std::abs(target - d);
      if (grad && d > 0.0) {
        // d|target - d|/dv_i = -sgn(target - d) * (v_i - v_j) / d
        const double s = (target - d) > 0.0 ? -scale : (target - d) < 0.0 ? scale : 0.0;
        for (size_t k = 0; k < vdim; ++k) {
          const double g = s * (vi[k] - vj[k]) / d;
          gv[i][k] += g;
          gv[j][k] -= g;
        }
      }
    }
  }

  if (w.balance != 0.0) {
    const double scale = w.balance / static_cast<double>(b_count);
    for (size_t b = 0; b < b_count; ++b) {
      double s = 0.0;
      for (double vk : caches[b].v) s += std::tanh(vk / tau);
      out.balance += scale * std::abs(s);
      if (grad && s != 0.0) {
        const double sgn = s > 0.0 ? scale : -scale;
        for (size_t k = 0; k < vdim; ++k) {
          const double th = std::tanh(caches[b].v[k] / tau);
          gv[b][k] += sgn * (1.0 - th * th) / tau;
        }
      }
    }
  }

  if (w.token_bias != 0.0) {
    const double scale = w.token_bias / static_cast<double>(vdim);
    for (size_t k = 0; k < vdim; ++k) {
      double s = 0.0;
      for (size_t b = 0; b < b_count; ++b) s += std::tanh(caches[b].v[k] / tau);
      out.token_bias += scale * std::abs(s);
      if (grad && s != 0.0) {
        const double sgn = s > 0.0 ? scale : -scale;
        for (size_t b = 0; b < b_count; ++b) {
          const double th = std::tanh(caches[b].v[k] / tau);
          gv[b][k] += sgn * (1.0 - th * th) / tau;
        }
      }
    }
  }

  if (!aug_caches.empty() && w.contrastive != 0.0) {
    const double scale = w.contrastive / static_cast<double>(aug_caches.size());
    for (size_t b = 0; b < aug_caches.size(); ++b) {
      const auto& v = caches[b].v;
      const auto& va = aug_caches[b].v;
      const double d = euclidean(v, va);
      out.contrastive += scale * d;
      if (grad && d > 0.0) {
        for (size_t k = 0; k < vdim; ++k) {
          const double g = scale * (v[k] - va[k]) / d;
          gv[b][k] += g;
          gv_aug[b][k] -= g;
        }
      }
    }
  }

  if (grad) {
    for (size_t b = 0; b < b_count; ++b) m.backward(caches[b], gv[b], *grad);
    for (size_t b = 0; b < aug_caches.size(); ++b) m.backward(aug_caches[b], gv_aug[b], *grad);
  }
  return out;
}

struct TrainConfig {
  size_t batch = 128;
  double learning_rate = 1e-2;
  size_t epochs = 20;
  LossWeights weights;
  double tau = 0.1;
  AugmentRates augment;
  size_t pair_samples = 512;  // smoothness pairs drawn per step
  size_t hidden = SemanticMapper::kDefaultHidden;
  size_t calibration_pairs = 1000;
  uint64_t seed = 1;
};

/// Estimates the observed distance range for rescaling: lo = 0, hi = max
/// embedding distance over sampled sentence pairs. Targets stay at -2 / 4.
inline RescaleBounds calibrate_bounds(const SentenceEmbedder& embedder,
                                      const std::vector<std::vector<TokenId>>& sentences,
                                      size_t n_pairs, Rng& rng) {
  if (sentences.size() < 2) throw IoError("bound calibration needs at least 2 sentences");
  RescaleBounds b;
  b.lo = 0.0;
  double hi = 0.0;
  for (size_t i = 0; i < n_pairs; ++i) {
    const size_t a = rng.uniform_index(sentences.size());
    size_t c = rng.uniform_index(sentences.size());
    if (c == a) c = (c + 1) % sentences.size();
    hi = std::max(hi, euclidean(embedder.embed(sentences[a]), embedder.embed(sentences[c])));
  }
  // Degenerate corpora (all sentences alike) still need a nonzero range.
  b.hi = std::max(hi, 0.1);
  b.validate();
  return b;
}

/// Minibatch SGD on the four-term loss. Deterministic for a fixed config;
/// per-epoch mean loss goes to `log` when provided.
inline SemanticMapper train_mapper(const Corpus& corpus, const SentenceEmbedder& embedder,
                                   const TrainConfig& cfg, std::ostream* log = nullptr) {
  if (corpus.docs.empty()) throw IoError("cannot train mapper on an empty corpus");
  if (cfg.batch < 2) throw IoError("batch size must be >= 2");
  const auto& sentences = corpus.docs;

  Rng root(derive_seed(cfg.seed, "mapper-train"));
  Rng calib_rng = root.fork("calibrate");
  const RescaleBounds bounds = calibrate_bounds(
      embedder, sentences, cfg.calibration_pairs, calib_rng);

  SemanticMapper m = SemanticMapper::random_init(embedder.dim(), cfg.hidden,
                                                 embedder.vocab_size(), embedder.seed(),
                                                 derive_seed(cfg.seed, "mapper-init"));
  m.set_bounds(bounds);

  const Augmenter augmenter(embedder, corpus);
  std::vector<size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(m.params().size());

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = root.fork("epoch:" + std::to_string(epoch));
    // Fisher-Yates with the epoch stream.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[erng.uniform_index(i)]);

    double epoch_loss = 0.0;
    size_t steps = 0;
    for (size_t start = 0; start + 2 <= order.size(); start += cfg.batch) {
      const size_t b_count = std::min(cfg.batch, order.size() - start);
      if (b_count < 2) break;
      LossBatch batch;
      batch.u.reserve(b_count);
      batch.u_aug.reserve(b_count);
      for (size_t b = 0; b < b_count; ++b) {
        const auto& s = sentences[order[start + b]];
        batch.u.push_back(embedder.embed(s));
        batch.u_aug.push_back(embedder.embed(augmenter.apply(s, cfg.augment, erng)));
      }
      const size_t all_pairs = b_count * (b_count - 1) / 2;
      const size_t want = std::min(cfg.pair_samples, all_pairs);
      for (size_t p = 0; p < want; ++p) {
        const size_t i = erng.uniform_index(b_count);
        size_t j = erng.uniform_index(b_count - 1);
        if (j >= i) ++j;
        batch.pairs.emplace_back(i, j);
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      const LossBreakdown lb = mapper_loss(m, batch, cfg.weights, cfg.tau, &grad);
      if (!std::isfinite(lb.total()))
        throw IoError("mapper training diverged (non-finite loss at epoch " +
                      std::to_string(epoch) + ")");
      auto& p = m.params();
      for (size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * grad[i];
      epoch_loss += lb.total();
      ++steps;
    }
    if (log && steps > 0)
      *log << "epoch " << epoch << " mean_loss "
           << epoch_loss / static_cast<double>(steps) << "\n";
  }
  return m;
}

}  // namespace awm
