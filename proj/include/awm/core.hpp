#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "awm/rng.hpp"
#include "awm/vocab.hpp"

namespace awm {

/// Unnormalized log-scores over the vocabulary.
struct Logits {
  std::vector<double> values;
};

/// Probability vector: entries >= 0, sum within 1e-9 of 1.
struct Probs {
  std::vector<double> values;
};

struct SamplerParams {
  int top_k = 50;
  double top_p = 0.9;
};

inline void validate_sampler(const SamplerParams& sp) {
  if (sp.top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (!(sp.top_p > 0.0) || sp.top_p > 1.0) throw std::invalid_argument("top_p must be in (0,1]");
}

inline bool is_valid_probs(const Probs& p, double tol = 1e-9) {
  double sum = 0.0;
  for (double x : p.values) {
    if (!(x >= 0.0) || !std::isfinite(x)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

/// Max-subtracted softmax; invariant under adding a constant to all entries.
inline Probs softmax(const Logits& l) {
  if (l.values.empty()) throw std::invalid_argument("softmax of empty logits");
  for (double x : l.values)
    if (!std::isfinite(x)) throw std::invalid_argument("softmax requires finite logits");
  const double m = *std::max_element(l.values.begin(), l.values.end());
  Probs p;
  p.values.resize(l.values.size());
  double sum = 0.0;
  for (size_t i = 0; i < l.values.size(); ++i) {
    p.values[i] = std::exp(l.values[i] - m);
    sum += p.values[i];
  }
  for (double& x : p.values) x /= sum;
  return p;
}

/// Shannon entropy in nats. Zero-probability entries contribute zero;
/// bounded by ln of the support size.
inline double shannon_entropy(const Probs& p) {
  double h = 0.0;
  for (double x : p.values)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

/// Max-shifted log(sum(exp(x))).
inline double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp of empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Keeps the top_k highest-probability tokens, then the smallest prefix of
/// those (by descending probability) whose cumulative mass reaches top_p,
/// and renormalizes. Removed entries are exactly zero. Ties cut at equal
/// probability keep the lower token index.
inline Probs filter_top_k_top_p(const Probs& p, const SamplerParams& sp) {
  validate_sampler(sp);
  const size_t n = p.values.size();
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (p.values[a] != p.values[b]) return p.values[a] > p.values[b];
    return a < b;
  });

  const size_t keep_k = std::min<size_t>(static_cast<size_t>(sp.top_k), n);
  size_t kept = 0;
  double mass = 0.0;
  for (size_t r = 0; r < keep_k; ++r) {
    mass += p.values[order[r]];
    kept = r + 1;
    if (mass >= sp.top_p) break;
  }

  Probs out;
  out.values.assign(n, 0.0);
  for (size_t r = 0; r < kept; ++r) {
    const uint32_t i = order[r];
    out.values[i] = p.values[i] / mass;
  }
  return out;
}

/// Seeded categorical draw; the returned index always has positive mass.
inline TokenId sample(const Probs& p, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  TokenId last_positive = 0;
  bool seen_positive = false;
  for (size_t i = 0; i < p.values.size(); ++i) {
    const double x = p.values[i];
    if (x <= 0.0) continue;
    last_positive = static_cast<TokenId>(i);
    seen_positive = true;
    cum += x;
    if (u < cum) return last_positive;
  }
  if (!seen_positive) throw std::invalid_argument("sample from all-zero distribution");
  return last_positive;
}

}  // namespace awm
