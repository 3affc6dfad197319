#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "awm/core.hpp"
#include "awm/corpus.hpp"
#include "awm/errors.hpp"
#include "awm/io.hpp"
#include "awm/vocab.hpp"

namespace awm {

namespace detail {

// Orders contexts by length first, then lexicographically, so map iteration
// matches the on-disk record order exactly.
struct ContextLess {
  bool operator()(const std::vector<TokenId>& a, const std::vector<TokenId>& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

}  // namespace detail

// Add-k smoothed n-gram model over token ids. Counts are kept for every
// context length 0..order-1, so queries near the start of a document (with
// short history) reuse the same tables instead of a separate backoff scheme.
//
// next_logits returns ln P + ln |V|: shifting by ln |V| leaves softmax and
// sampling untouched but makes the uniform distribution sit at logit zero,
// so above-average tokens carry positive logits and below-average negative.
// Multiplicative perturbations downstream then boost preferred tokens
// instead of suppressing them.
class NGramModel {
 public:
  NGramModel(size_t vocab_size, size_t order, double k, uint64_t vocab_hash = 0)
      : vocab_size_(vocab_size), order_(order), k_(k), vocab_hash_(vocab_hash) {
    if (vocab_size_ < 2) throw IoError("n-gram model needs a vocabulary of at least 2");
    if (order_ < 1) throw IoError("n-gram order must be >= 1");
    if (!(k_ > 0.0)) throw IoError("smoothing constant k must be > 0");
  }

  size_t vocab_size() const { return vocab_size_; }
  size_t order() const { return order_; }
  double smoothing_k() const { return k_; }
  uint64_t vocab_hash() const { return vocab_hash_; }

  /// Registers `n` observations of `token` after exactly `ctx`.
  void add_count(std::span<const TokenId> ctx, TokenId token, uint64_t n) {
    if (ctx.size() >= order_) throw IoError("context longer than model order allows");
    if (token >= vocab_size_) throw IoError("token id outside vocabulary");
    for (TokenId c : ctx)
      if (c >= vocab_size_) throw IoError("context token id outside vocabulary");
    auto& slot = counts_[std::vector<TokenId>(ctx.begin(), ctx.end())];
    slot.by_token[token] += n;
    slot.total += n;
  }

  /// Fits counts on a tokenized corpus. Every position contributes one count
  /// per available context length, so length-L lookups are consistent for all
  /// L in [0, order).
  static NGramModel train(const Corpus& corpus, const Vocabulary& vocab, size_t order,
                          double k) {
    NGramModel m(vocab.size(), order, k, vocab.hash());
    for (const auto& doc : corpus.docs) {
      for (size_t t = 0; t < doc.size(); ++t) {
        const size_t max_len = std::min(t, order - 1);
        for (size_t len = 0; len <= max_len; ++len)
          m.add_count(std::span<const TokenId>(doc.data() + (t - len), len), doc[t], 1);
      }
    }
    return m;
  }

  /// Smoothed distribution over the next token given (possibly long) history.
  /// Uses the last min(order-1, |history|) tokens.
  Probs next_probs(std::span<const TokenId> history) const {
    Probs p;
    p.values.assign(vocab_size_, 0.0);
    const ContextCounts* slot = find_context(history);
    const double total = slot ? static_cast<double>(slot->total) : 0.0;
    const double denom = total + k_ * static_cast<double>(vocab_size_);
    const double base = k_ / denom;
    for (auto& v : p.values) v = base;
    if (slot)
      for (const auto& [tok, c] : slot->by_token)
        p.values[tok] = (static_cast<double>(c) + k_) / denom;
    return p;
  }

  /// ln P(token | history) + ln |V| for every token (see class comment).
  Logits next_logits(std::span<const TokenId> history) const {
    const Probs p = next_probs(history);
    Logits l;
    l.values.resize(vocab_size_);
    const double offset = std::log(static_cast<double>(vocab_size_));
    for (size_t i = 0; i < p.values.size(); ++i) l.values[i] = std::log(p.values[i]) + offset;
    return l;
  }

  /// ln P(token | history) for a single token.
  double log_prob(std::span<const TokenId> history, TokenId token) const {
    if (token >= vocab_size_) throw IoError("token id outside vocabulary");
    const ContextCounts* slot = find_context(history);
    const double total = slot ? static_cast<double>(slot->total) : 0.0;
    uint64_t c = 0;
    if (slot) {
      auto it = slot->by_token.find(token);
      if (it != slot->by_token.end()) c = it->second;
    }
    const double denom = total + k_ * static_cast<double>(vocab_size_);
    return std::log((static_cast<double>(c) + k_) / denom);
  }

  /// Mean negative log likelihood in nats per token. The first token is
  /// scored against the empty context, so every token contributes.
  double mean_nll(std::span<const TokenId> tokens) const {
    if (tokens.empty()) throw IoError("cannot score an empty token sequence");
    double nll = 0.0;
    for (size_t t = 0; t < tokens.size(); ++t) {
      const size_t len = std::min(t, order_ - 1);
      nll -= log_prob(std::span<const TokenId>(tokens.data() + (t - len), len), tokens[t]);
    }
    return nll / static_cast<double>(tokens.size());
  }

  double perplexity(std::span<const TokenId> tokens) const { return std::exp(mean_nll(tokens)); }

  /// Throws MismatchError when the model was fitted on a different vocabulary.
  void verify_vocab(const Vocabulary& vocab) const {
    if (vocab_hash_ != vocab.hash())
      throw MismatchError("n-gram model was trained on a different vocabulary");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write n-gram model: " + path);
    write_magic(out, kMagic);
    write_u64_le(out, kVersion);
    write_u64_le(out, vocab_size_);
    write_u64_le(out, order_);
    write_f64_le(out, k_);
    write_u64_le(out, vocab_hash_);
    uint64_t records = 0;
    for (const auto& [ctx, slot] : counts_) records += slot.by_token.size();
    write_u64_le(out, records);
    for (const auto& [ctx, slot] : counts_) {
      for (const auto& [tok, c] : slot.by_token) {
        write_u64_le(out, ctx.size());
        for (TokenId id : ctx) write_u64_le(out, id);
        write_u64_le(out, tok);
        write_u64_le(out, c);
      }
    }
    if (!out) throw IoError("write failed: " + path);
  }

  static NGramModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open n-gram model: " + path);
    expect_magic(in, kMagic, path);
    if (read_u64_le(in) != kVersion) throw IoError("unsupported n-gram model version: " + path);
    const uint64_t vocab_size = read_u64_le(in);
    const uint64_t order = read_u64_le(in);
    const double k = read_f64_le(in);
    const uint64_t vocab_hash = read_u64_le(in);
    NGramModel m(vocab_size, order, k, vocab_hash);
    const uint64_t records = read_u64_le(in);
    for (uint64_t r = 0; r < records; ++r) {
      const uint64_t len = read_u64_le(in);
      if (len >= order) throw IoError("corrupt n-gram model (context too long): " + path);
      std::vector<TokenId> ctx(len);
      for (auto& id : ctx) id = static_cast<TokenId>(read_u64_le(in));
      const auto tok = static_cast<TokenId>(read_u64_le(in));
      const uint64_t c = read_u64_le(in);
      m.add_count(ctx, tok, c);
    }
    return m;
  }

 private:
  struct ContextCounts {
    uint64_t total = 0;
    std::map<TokenId, uint64_t> by_token;
  };

  static constexpr char kMagic[9] = "AWMNGRM1";
  static constexpr uint64_t kVersion = 1;

  const ContextCounts* find_context(std::span<const TokenId> history) const {
    const size_t len = std::min(history.size(), order_ - 1);
    lookup_key_.assign(history.end() - len, history.end());
    auto it = counts_.find(lookup_key_);
    return it == counts_.end() ? nullptr : &it->second;
  }

  size_t vocab_size_;
  size_t order_;
  double k_;
  uint64_t vocab_hash_;
  std::map<std::vector<TokenId>, ContextCounts, detail::ContextLess> counts_;
  mutable std::vector<TokenId> lookup_key_;
};

}  // namespace awm
