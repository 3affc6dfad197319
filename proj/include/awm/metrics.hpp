#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "awm/errors.hpp"
#include "awm/vocab.hpp"
#include "awm/watermark.hpp"

namespace awm {

struct ScoredSample {
  double score = 0.0;
  bool watermarked = false;  // label, not prediction
  std::string provenance;
};

inline void split_scores(std::span<const ScoredSample> samples, std::vector<double>& pos,
                         std::vector<double>& neg) {
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw IoError("non-finite detection score in metric input");
    (s.watermarked ? pos : neg).push_back(s.score);
  }
  if (pos.empty() || neg.empty())
    throw IoError("metrics need both watermarked and human samples");
}

/// Probability a random positive outscores a random negative, ties as 1/2.
inline double roc_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw IoError("roc_auc needs both classes");
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double roc_auc(std::span<const ScoredSample> samples) {
  std::vector<double> pos, neg;
  split_scores(samples, pos, neg);
  return roc_auc(pos, neg);
}

namespace detail {

// Candidate decision thresholds: midpoints between adjacent distinct scores,
// plus -inf (everything positive) and +inf (everything negative).
inline std::vector<double> sweep_thresholds(std::span<const double> pos,
                                            std::span<const double> neg) {
  std::set<double> uniq(pos.begin(), pos.end());
  uniq.insert(neg.begin(), neg.end());
  std::vector<double> sorted(uniq.begin(), uniq.end());
  std::vector<double> out;
  out.push_back(-std::numeric_limits<double>::infinity());
  for (size_t i = 0; i + 1 < sorted.size(); ++i) out.push_back((sorted[i] + sorted[i + 1]) / 2.0);
  out.push_back(std::numeric_limits<double>::infinity());
  return out;
}

struct Confusion {
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Decision rule: predicted watermarked iff score >= threshold.
inline Confusion confusion_at(std::span<const double> pos, std::span<const double> neg,
                              double threshold) {
  Confusion c;
  for (double p : pos) (p >= threshold ? c.tp : c.fn)++;
  for (double n : neg) (n >= threshold ? c.fp : c.tn)++;
  return c;
}

}  // namespace detail

/// Best F1 over the threshold sweep, watermarked = positive class.
inline std::pair<double, double> best_f1(std::span<const double> pos,
                                         std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw IoError("best_f1 needs both classes");
  double best = -1.0;
  double best_threshold = 0.0;
  for (double t : detail::sweep_thresholds(pos, neg)) {
    const auto c = detail::confusion_at(pos, neg, t);
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    const double f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
    if (f1 > best) {
      best = f1;
      best_threshold = t;
    }
  }
  return {best, best_threshold};
}

inline std::pair<double, double> best_f1(std::span<const ScoredSample> samples) {
  std::vector<double> pos, neg;
  split_scores(samples, pos, neg);
  return best_f1(pos, neg);
}

/// Highest TPR attainable while the empirical FPR stays at or below target.
inline double tpr_at_fpr(std::span<const double> pos, std::span<const double> neg,
                         double fpr_target) {
  if (pos.empty() || neg.empty()) throw IoError("tpr_at_fpr needs both classes");
  double best_tpr = 0.0;
  for (double t : detail::sweep_thresholds(pos, neg)) {
    const auto c = detail::confusion_at(pos, neg, t);
    const double fpr = static_cast<double>(c.fp) / static_cast<double>(neg.size());
    if (fpr <= fpr_target)
      best_tpr = std::max(best_tpr, static_cast<double>(c.tp) / static_cast<double>(pos.size()));
  }
  return best_tpr;
}

inline double tpr_at_fpr(std::span<const ScoredSample> samples, double fpr_target) {
  std::vector<double> pos, neg;
  split_scores(samples, pos, neg);
  return tpr_at_fpr(pos, neg, fpr_target);
}

/// (FPR, TPR) operating points over the sweep, FPR ascending, for plotting.
inline std::vector<std::pair<double, double>> roc_curve(std::span<const double> pos,
                                                        std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw IoError("roc_curve needs both classes");
  std::vector<std::pair<double, double>> pts;
  for (double t : detail::sweep_thresholds(pos, neg)) {
    const auto c = detail::confusion_at(pos, neg, t);
    pts.emplace_back(static_cast<double>(c.fp) / static_cast<double>(neg.size()),
                     static_cast<double>(c.tp) / static_cast<double>(pos.size()));
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

/// Pooled fraction of watermarked tokens across traces.
inline double awr(std::span<const GenerationTrace> traces) {
  if (traces.empty()) throw IoError("awr needs at least one trace");
  size_t flagged = 0;
  size_t total = 0;
  for (const auto& tr : traces) {
    total += tr.steps.size();
    for (const auto& s : tr.steps) flagged += s.watermarked ? 1 : 0;
  }
  if (total == 0) throw IoError("awr over empty traces");
  return static_cast<double>(flagged) / static_cast<double>(total);
}

/// 1 - distinct/total n-grams.
inline double repetition_rate(std::span<const TokenId> text, size_t n) {
  if (n == 0) throw IoError("n-gram size must be >= 1");
  if (text.size() < n) throw IoError("text shorter than n-gram size");
  std::set<std::vector<TokenId>> distinct;
  const size_t total = text.size() - n + 1;
  for (size_t i = 0; i < total; ++i)
    distinct.insert(std::vector<TokenId>(text.begin() + i, text.begin() + i + n));
  return 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(total);
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw IoError("mean of empty set");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw IoError("median of empty set");
  std::sort(xs.begin(), xs.end());
  const size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : (xs[mid - 1] + xs[mid]) / 2.0;
}

}  // namespace awm
