#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "awm/corpus.hpp"
#include "awm/embedder.hpp"
#include "awm/errors.hpp"
#include "awm/ngram.hpp"
#include "awm/rng.hpp"
#include "awm/vocab.hpp"
#include "awm/watermark.hpp"

namespace awm {

// Parametric token-edit paraphrase. Edits are the knob standing in for an
// LLM paraphraser: substitutions stay semantically close (nearest embedding
// neighbor), insertions stay plausible (measurement-model samples), local
// shuffles reorder without long-range moves.
struct ParaphraseParams {
  double substitute = 0.1;
  double erase = 0.05;
  double insert = 0.05;
  size_t shuffle_window = 0;  // 0 or 1 disables shuffling
  uint64_t seed = 0;

  void validate() const {
    for (double r : {substitute, erase, insert})
      if (r < 0.0 || r > 1.0) throw IoError("edit rates must lie in [0, 1]");
  }
};

inline std::vector<TokenId> paraphrase_attack(std::span<const TokenId> text,
                                              const ParaphraseParams& pp, const NGramModel& mm,
                                              const SentenceEmbedder& embedder) {
  pp.validate();
  if (text.empty()) throw IoError("cannot attack an empty text");
  Rng rng(derive_seed(pp.seed, "paraphrase"));

  std::vector<TokenId> cur(text.begin(), text.end());
  for (auto& t : cur)
    if (pp.substitute > 0.0 && rng.uniform() < pp.substitute) t = embedder.nearest_token(t);

  if (pp.erase > 0.0) {
    std::vector<TokenId> kept;
    kept.reserve(cur.size());
    for (TokenId t : cur)
      if (!(rng.uniform() < pp.erase)) kept.push_back(t);
    if (kept.empty()) kept.push_back(cur[rng.uniform_index(cur.size())]);
    cur = std::move(kept);
  }

  if (pp.insert > 0.0) {
    std::vector<TokenId> out;
    out.reserve(cur.size() + 4);
    for (TokenId t : cur) {
      out.push_back(t);
      if (rng.uniform() < pp.insert) {
        Probs p = mm.next_probs(out);
        out.push_back(sample(p, rng));
      }
    }
    cur = std::move(out);
  }

  if (pp.shuffle_window > 1) {
    for (size_t start = 0; start < cur.size(); start += pp.shuffle_window) {
      const size_t len = std::min(pp.shuffle_window, cur.size() - start);
      for (size_t i = len; i > 1; --i)
        std::swap(cur[start + i - 1], cur[start + rng.uniform_index(i)]);
    }
  }
  return cur;
}

struct SpoofConfig {
  size_t generations = 5000;
  size_t pool_size = 181;  // candidate common tokens the attacker tallies
  size_t top_h = 50;       // inferred-green cutoff
  size_t text_len = 40;    // tokens per attack generation

  void validate() const {
    if (generations < 1) throw IoError("spoofing needs at least one generation");
    if (top_h > pool_size) throw IoError("top-H cutoff cannot exceed the pool size");
  }
};

/// The `size` most frequent corpus tokens (count desc, id asc). Shrinks,
/// with `shrunk` set, when the corpus has fewer distinct tokens.
inline std::vector<TokenId> common_token_pool(const Corpus& corpus, size_t vocab_size,
                                              size_t size, bool* shrunk = nullptr) {
  std::vector<uint64_t> counts(vocab_size, 0);
  for (const auto& doc : corpus.docs)
    for (TokenId t : doc) {
      if (t >= vocab_size) throw MismatchError("corpus token outside vocabulary");
      ++counts[t];
    }
  std::vector<TokenId> ids;
  for (TokenId t = 0; t < vocab_size; ++t)
    if (counts[t] > 0) ids.push_back(t);
  std::sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  if (shrunk) *shrunk = ids.size() < size;
  if (ids.size() > size) ids.resize(size);
  return ids;
}

/// Adaptive generation under the strengthened spoofing regime: the entropy
/// gate runs normally, but every perturbed step uses one fixed scaling
/// vector instead of the prefix's embedding. Opening-sentence keying is
/// bypassed (the fixed vector plays that role).
inline std::vector<TokenId> spoof_generate_adaptive_fixed(
    const NGramModel& lm, const NGramModel& mm, std::span<const TokenId> prompt,
    const WatermarkParams& wp, std::span<const uint8_t> fixed_vhat, size_t max_tokens,
    Rng& rng) {
  validate_sampler(wp.sampler);
  detail::check_same_vocab(lm, mm);
  if (fixed_vhat.size() != lm.vocab_size())
    throw MismatchError("scaling vector length does not match vocabulary");
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  out.reserve(max_tokens);
  for (size_t step = 0; step < max_tokens; ++step) {
    Logits l = lm.next_logits(ctx);
    if (gate_entropy(mm, out) >= wp.alpha) l = awts_perturb(l, fixed_vhat, wp.delta);
    Probs p = softmax(l);
    p = filter_top_k_top_p(p, wp.sampler);
    const TokenId tok = sample(p, rng);
    out.push_back(tok);
    ctx.push_back(tok);
  }
  return out;
}

struct SpoofResult {
  std::vector<TokenId> inferred;  // top-H pool tokens by observed frequency
  double decryption_rate = 0.0;   // fraction of inferred tokens truly green
  size_t pool_used = 0;
  uint64_t observed = 0;  // tallied token occurrences
};

// Frequency-analysis spoofing. The attacker samples `generations` texts from
// the watermarked scheme, tallies occurrences of pool tokens (optionally only
// at positions following `prefix_filter`, the KGW-1 variant), and guesses the
// top-H as green. The caller supplies the ground-truth green mask the scheme
// actually used, so the result is the attacker's precision.
inline SpoofResult spoof_frequency_attack(
    const std::function<std::vector<TokenId>(size_t)>& sample_generation,
    std::span<const TokenId> pool, std::span<const uint8_t> true_green, const SpoofConfig& sc,
    std::optional<TokenId> prefix_filter = std::nullopt) {
  sc.validate();
  if (pool.empty()) throw IoError("spoofing needs a non-empty token pool");

  std::vector<uint64_t> counts(true_green.size(), 0);
  std::vector<uint8_t> in_pool(true_green.size(), 0);
  for (TokenId t : pool) {
    if (t >= in_pool.size()) throw MismatchError("pool token outside vocabulary");
    in_pool[t] = 1;
  }

  SpoofResult res;
  res.pool_used = pool.size();
  for (size_t g = 0; g < sc.generations; ++g) {
    const std::vector<TokenId> text = sample_generation(g);
    for (size_t i = 0; i < text.size(); ++i) {
      if (prefix_filter && (i == 0 || text[i - 1] != *prefix_filter)) continue;
      const TokenId t = text[i];
      if (t < in_pool.size() && in_pool[t]) {
        ++counts[t];
        ++res.observed;
      }
    }
  }

  std::vector<TokenId> ranked(pool.begin(), pool.end());
  std::sort(ranked.begin(), ranked.end(), [&](TokenId a, TokenId b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  const size_t h = std::min(sc.top_h, ranked.size());
  res.inferred.assign(ranked.begin(), ranked.begin() + h);

  size_t hits = 0;
  for (TokenId t : res.inferred)
    if (true_green[t]) ++hits;
  res.decryption_rate = h == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(h);
  return res;
}

}  // namespace awm
