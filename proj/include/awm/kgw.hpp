#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "awm/core.hpp"
#include "awm/errors.hpp"
#include "awm/ngram.hpp"
#include "awm/rng.hpp"
#include "awm/vocab.hpp"

namespace awm {

enum class KGWScheme { kFixedKey, kPrevTokenHash };  // KGW-0 / KGW-1

struct KGWParams {
  double gamma = 0.5;      // green fraction of the vocabulary
  double delta_add = 2.0;  // additive logit bias on green tokens
  KGWScheme scheme = KGWScheme::kFixedKey;
  uint64_t key = 0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw IoError("gamma must be in (0, 1)");
    if (delta_add < 0.0) throw IoError("delta_add must be >= 0");
  }
};

inline size_t kgw_green_size(double gamma, size_t vocab_size) {
  return static_cast<size_t>(std::llround(gamma * static_cast<double>(vocab_size)));
}

/// Seed of the per-step green list under KGW-1. Bit-exact contract: mix the
/// key with the previous token id through one splitmix64 step.
inline uint64_t kgw1_list_seed(uint64_t key, TokenId prev) {
  uint64_t s = key ^ (0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(prev) + 1));
  return splitmix64_next(s);
}

/// Membership mask of a green list drawn without replacement from the seed:
/// partial Fisher-Yates over the identity permutation, first `size` slots.
inline std::vector<uint8_t> kgw_green_mask(uint64_t seed, size_t vocab_size, size_t size) {
  if (size > vocab_size) throw IoError("green list larger than vocabulary");
  std::vector<TokenId> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (size_t i = 0; i < size; ++i) {
    const size_t j = i + rng.uniform_index(vocab_size - i);
    std::swap(perm[i], perm[j]);
  }
  std::vector<uint8_t> mask(vocab_size, 0);
  for (size_t i = 0; i < size; ++i) mask[perm[i]] = 1;
  return mask;
}

inline std::vector<uint8_t> kgw0_green_mask(const KGWParams& kp, size_t vocab_size) {
  return kgw_green_mask(derive_seed(kp.key, "kgw0-green"), vocab_size,
                        kgw_green_size(kp.gamma, vocab_size));
}

inline std::vector<uint8_t> kgw1_green_mask(const KGWParams& kp, size_t vocab_size,
                                            TokenId prev) {
  return kgw_green_mask(kgw1_list_seed(kp.key, prev), vocab_size,
                        kgw_green_size(kp.gamma, vocab_size));
}

// Additive-bias watermark generation. KGW-1's first step hashes the last
// prompt token; without a prompt it falls back to token id 0, which a
// detector cannot replay anyway (it skips the first position).
inline std::vector<TokenId> kgw_generate(const NGramModel& lm, std::span<const TokenId> prompt,
                                         const KGWParams& kp, const SamplerParams& sampler,
                                         size_t max_tokens, Rng& rng) {
  kp.validate();
  validate_sampler(sampler);
  for (TokenId t : prompt)
    if (t >= lm.vocab_size()) throw MismatchError("prompt token outside vocabulary");

  const std::vector<uint8_t> fixed_mask = kp.scheme == KGWScheme::kFixedKey
                                              ? kgw0_green_mask(kp, lm.vocab_size())
                                              : std::vector<uint8_t>();
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  out.reserve(max_tokens);
  for (size_t step = 0; step < max_tokens; ++step) {
    Logits l = lm.next_logits(ctx);
    if (kp.delta_add != 0.0) {
      const std::vector<uint8_t>& mask =
          kp.scheme == KGWScheme::kFixedKey
              ? fixed_mask
              : kgw1_green_mask(kp, lm.vocab_size(), ctx.empty() ? TokenId{0} : ctx.back());
      for (size_t i = 0; i < l.values.size(); ++i)
        if (mask[i]) l.values[i] += kp.delta_add;
    }
    Probs p = softmax(l);
    p = filter_top_k_top_p(p, sampler);
    const TokenId tok = sample(p, rng);
    out.push_back(tok);
    ctx.push_back(tok);
  }
  return out;
}

struct KGWDetection {
  bool ok = false;
  double score = 0.0;  // green-token fraction over scorable positions
  size_t green = 0;
  size_t scored = 0;
};

/// Detection statistic: fraction of green tokens. KGW-1 scores positions
/// 2..n (the first has no in-text predecessor) and needs >= 2 tokens.
inline KGWDetection kgw_detect(std::span<const TokenId> text, const KGWParams& kp,
                               size_t vocab_size) {
  kp.validate();
  for (TokenId t : text)
    if (t >= vocab_size) throw MismatchError("candidate token outside vocabulary");
  KGWDetection d;
  if (kp.scheme == KGWScheme::kFixedKey) {
    if (text.empty()) return d;
    const auto mask = kgw0_green_mask(kp, vocab_size);
    for (TokenId t : text)
      if (mask[t]) ++d.green;
    d.scored = text.size();
  } else {
    if (text.size() < 2) return d;
    for (size_t i = 1; i < text.size(); ++i) {
      const auto mask = kgw1_green_mask(kp, vocab_size, text[i - 1]);
      if (mask[text[i]]) ++d.green;
      ++d.scored;
    }
  }
  d.ok = true;
  d.score = static_cast<double>(d.green) / static_cast<double>(d.scored);
  return d;
}

}  // namespace awm
