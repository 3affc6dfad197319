#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "awm/errors.hpp"
#include "awm/rng.hpp"
#include "awm/vocab.hpp"

namespace awm {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw MismatchError("vector dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Bag-of-tokens sentence embedder: a seeded Gaussian embedding table, mean
// pooling, L2 normalization. Token order never matters, so small edits move
// the embedding smoothly. The table is a pure function of (vocab size, dim,
// seed); the seed doubles as part of the watermark secret.
class SentenceEmbedder {
 public:
  static constexpr size_t kDefaultDim = 64;

  SentenceEmbedder(size_t vocab_size, size_t dim, uint64_t seed)
      : vocab_size_(vocab_size), dim_(dim), seed_(seed), table_(vocab_size * dim) {
    if (vocab_size_ < 2) throw IoError("embedder needs a vocabulary of at least 2");
    if (dim_ < 1) throw IoError("embedding dimension must be >= 1");
    Rng rng(derive_seed(seed, "embed-table"));
    for (auto& w : table_) w = rng.gaussian();
  }

  size_t vocab_size() const { return vocab_size_; }
  size_t dim() const { return dim_; }
  uint64_t seed() const { return seed_; }

  std::span<const double> row(TokenId t) const {
    if (t >= vocab_size_) throw MismatchError("token id outside embedder vocabulary");
    return std::span<const double>(table_.data() + static_cast<size_t>(t) * dim_, dim_);
  }

  /// Mean of token embeddings, L2-normalized. The empty sequence (and the
  /// never-occurring zero-mean case) maps to the fixed unit vector e0.
  std::vector<double> embed(std::span<const TokenId> tokens) const {
    std::vector<double> sum(dim_, 0.0);
    for (TokenId t : tokens) {
      const auto r = row(t);
      for (size_t i = 0; i < dim_; ++i) sum[i] += r[i];
    }
    return finish(sum, tokens.size());
  }

  /// Nearest other token in the embedding table (Euclidean; ties to the
  /// lower id). Serves as the substitution step in edit-based paraphrasing.
  TokenId nearest_token(TokenId t) const {
    build_nn_table();
    if (t >= vocab_size_) throw MismatchError("token id outside embedder vocabulary");
    return nn_[t];
  }

  std::vector<double> finish(const std::vector<double>& sum, size_t count) const {
    std::vector<double> u(dim_, 0.0);
    if (count == 0) {
      u[0] = 1.0;
      return u;
    }
    const double inv = 1.0 / static_cast<double>(count);
    double norm_sq = 0.0;
    for (size_t i = 0; i < dim_; ++i) {
      u[i] = sum[i] * inv;
      norm_sq += u[i] * u[i];
    }
    if (norm_sq == 0.0) {
      std::fill(u.begin(), u.end(), 0.0);
      u[0] = 1.0;
      return u;
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (auto& x : u) x *= inv_norm;
    return u;
  }

 private:
  void build_nn_table() const {
    if (!nn_.empty()) return;
    nn_.resize(vocab_size_);
    for (TokenId a = 0; a < vocab_size_; ++a) {
      double best = 0.0;
      TokenId best_id = a == 0 ? 1 : 0;
      bool first = true;
      for (TokenId b = 0; b < vocab_size_; ++b) {
        if (b == a) continue;
        const double d = euclidean(row(a), row(b));
        if (first || d < best) {
          first = false;
          best = d;
          best_id = b;
        }
      }
      nn_[a] = best_id;
    }
  }

  size_t vocab_size_;
  size_t dim_;
  uint64_t seed_;
  std::vector<double> table_;
  mutable std::vector<TokenId> nn_;
};

// Streaming prefix embedder: push tokens as they are generated or scanned
// and read the current sentence embedding without re-pooling the prefix.
// Sums in push order, so it is bit-identical to embed() on the same prefix.
class EmbedAccumulator {
 public:
  explicit EmbedAccumulator(const SentenceEmbedder& embedder)
      : embedder_(&embedder), sum_(embedder.dim(), 0.0) {}

  void push(TokenId t) {
    const auto r = embedder_->row(t);
    for (size_t i = 0; i < sum_.size(); ++i) sum_[i] += r[i];
    ++count_;
  }

  size_t count() const { return count_; }

  std::vector<double> embedding() const { return embedder_->finish(sum_, count_); }

 private:
  const SentenceEmbedder* embedder_;
  std::vector<double> sum_;
  size_t count_ = 0;
};

}  // namespace awm
