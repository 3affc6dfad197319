#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "awm/core.hpp"
#include "awm/embedder.hpp"
#include "awm/errors.hpp"
#include "awm/mapper.hpp"
#include "awm/ngram.hpp"
#include "awm/rng.hpp"
#include "awm/vocab.hpp"

namespace awm {

// Secret bundle shared by generator and detector. The opening sentence keys
// the first `measure_threshold` tokens, where too little text exists for a
// stable prefix embedding.
struct WatermarkParams {
  double alpha = 2.0;             // entropy gate threshold, nats
  double delta = 1.5;             // perturbation strength; 0 disables (control runs)
  size_t measure_threshold = 50;  // leading tokens keyed by the opening sentence
  std::vector<TokenId> opening;
  SamplerParams sampler;
  size_t max_tokens = 200;

  void validate() const {
    if (delta < 0.0) throw IoError("watermark strength delta must be >= 0");
    if (measure_threshold > 0 && opening.empty())
      throw IoError("opening sentence required when measure_threshold > 0");
    validate_sampler(sampler);
  }
};

/// Temperature-scaled perturbation: l̂_i = l_i * (1 + delta * v̂_i).
inline Logits awts_perturb(const Logits& l, std::span<const uint8_t> vhat, double delta) {
  if (l.values.size() != vhat.size()) throw MismatchError("logits / scaling vector length mismatch");
  Logits out = l;
  if (delta == 0.0) return out;
  for (size_t i = 0; i < out.values.size(); ++i)
    if (vhat[i]) out.values[i] *= 1.0 + delta;
  return out;
}

/// Per-token log likelihood-ratio approximation (normalization ratio ~ 1).
/// Analysis-only; the detector drops the unknown logit value.
inline double likelihood_ratio_term(double logit_k, double delta, uint8_t vhat_k) {
  return logit_k * delta * static_cast<double>(vhat_k);
}

/// The gate statistic both generation and detection replay: entropy of the
/// measurement model's next-token distribution given generated text only.
/// One shared code path, so the two sides agree bit for bit.
inline double gate_entropy(const NGramModel& mm, std::span<const TokenId> generated) {
  return shannon_entropy(mm.next_probs(generated));
}

struct StepRecord {
  bool watermarked = false;
  bool has_entropy = false;  // gate consulted (false for the opening-keyed steps)
  double entropy = 0.0;
  bool green = false;  // sampled token's v̂ entry, when watermarked
};

struct GenerationTrace {
  std::vector<TokenId> tokens;
  std::vector<StepRecord> steps;
};

namespace detail {

inline void check_watermark_models(const NGramModel& mm, const SentenceEmbedder& embedder,
                                   const SemanticMapper& mapper) {
  if (mm.vocab_size() != mapper.out_dim() || mm.vocab_size() != embedder.vocab_size())
    throw MismatchError("measurement model, embedder, and mapper vocabularies differ");
  if (embedder.dim() != mapper.in_dim())
    throw MismatchError("embedder dimension does not match mapper input");
  if (embedder.seed() != mapper.embedder_seed())
    throw MismatchError("mapper was trained against a different embedder seed");
}

inline void check_same_vocab(const NGramModel& a, const NGramModel& b) {
  if (a.vocab_size() != b.vocab_size()) throw MismatchError("models use different vocabularies");
  if (a.vocab_hash() != 0 && b.vocab_hash() != 0 && a.vocab_hash() != b.vocab_hash())
    throw MismatchError("models were trained on different vocabularies");
}

}  // namespace detail

/// Unwatermarked sampling loop; also the delta=0 reference path. Consumes
/// exactly one uniform draw per emitted token.
inline std::vector<TokenId> generate_plain(const NGramModel& lm, std::span<const TokenId> prompt,
                                           const SamplerParams& sampler, size_t max_tokens,
                                           Rng& rng) {
  validate_sampler(sampler);
  if (!lm.vocab_size()) throw IoError("empty model");
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  for (TokenId t : ctx)
    if (t >= lm.vocab_size()) throw MismatchError("prompt token outside vocabulary");
  std::vector<TokenId> out;
  out.reserve(max_tokens);
  for (size_t step = 0; step < max_tokens; ++step) {
    Probs p = softmax(lm.next_logits(ctx));
    p = filter_top_k_top_p(p, sampler);
    const TokenId tok = sample(p, rng);
    out.push_back(tok);
    ctx.push_back(tok);
  }
  return out;
}

// Watermarked generation. Step t (1-based): the first measure_threshold
// tokens are always perturbed, keyed by the opening sentence's embedding;
// afterwards a step is perturbed only when the measurement model's entropy
// over the generated text reaches alpha. The measurement model and the
// embedding never see the prompt, so detection can replay both.
inline GenerationTrace generate_watermarked(const NGramModel& lm, const NGramModel& mm,
                                            const SentenceEmbedder& embedder,
                                            const SemanticMapper& mapper,
                                            std::span<const TokenId> prompt,
                                            const WatermarkParams& wp, Rng& rng) {
  wp.validate();
  detail::check_same_vocab(lm, mm);
  detail::check_watermark_models(mm, embedder, mapper);
  for (TokenId t : prompt)
    if (t >= lm.vocab_size()) throw MismatchError("prompt token outside vocabulary");
  for (TokenId t : wp.opening)
    if (t >= lm.vocab_size()) throw MismatchError("opening sentence token outside vocabulary");

  std::vector<uint8_t> vhat_opening;
  if (wp.measure_threshold > 0)
    vhat_opening = binarize(mapper.forward(embedder.embed(wp.opening)));

  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  EmbedAccumulator prefix(embedder);
  GenerationTrace trace;
  trace.tokens.reserve(wp.max_tokens);
  trace.steps.reserve(wp.max_tokens);

  std::vector<uint8_t> vhat;
  for (size_t step = 1; step <= wp.max_tokens; ++step) {
    StepRecord rec;
    const uint8_t* active_vhat = nullptr;
    if (step <= wp.measure_threshold) {
      rec.watermarked = true;
      active_vhat = vhat_opening.data();
    } else {
      rec.has_entropy = true;
      rec.entropy = gate_entropy(mm, trace.tokens);
      if (rec.entropy >= wp.alpha) {
        rec.watermarked = true;
        vhat = binarize(mapper.forward(prefix.embedding()));
        active_vhat = vhat.data();
      }
    }

    Logits l = lm.next_logits(ctx);
    if (rec.watermarked)
      l = awts_perturb(l, std::span<const uint8_t>(active_vhat, l.values.size()), wp.delta);
    Probs p = softmax(l);
    p = filter_top_k_top_p(p, wp.sampler);
    const TokenId tok = sample(p, rng);
    if (rec.watermarked) rec.green = active_vhat[tok] != 0;

    trace.tokens.push_back(tok);
    trace.steps.push_back(rec);
    ctx.push_back(tok);
    prefix.push(tok);
  }
  return trace;
}

enum class DetectStatus { kOk, kInconclusive };

struct DetectionReport {
  DetectStatus status = DetectStatus::kInconclusive;
  double score = 0.0;  // mean contribution over W; in [0, delta]
  size_t w_count = 0;
  size_t token_count = 0;
  bool short_text = false;              // candidate shorter than measure_threshold
  std::vector<uint8_t> in_w;            // per candidate token
  std::vector<double> contributions;    // delta * v̂ of the token, 0 outside W
  double alpha = 0.0;
  double delta = 0.0;
  size_t measure_threshold = 0;
};

// Model-agnostic detection: replays the entropy gate over the candidate text
// with the measurement model (never the generation model, never the prompt),
// extracts v̂ from the preceding candidate text (opening sentence for the
// first measure_threshold positions), and averages delta * v̂ at the
// candidate tokens over all potential watermarked positions.
inline DetectionReport detect_watermark(std::span<const TokenId> text, const NGramModel& mm,
                                        const SentenceEmbedder& embedder,
                                        const SemanticMapper& mapper,
                                        const WatermarkParams& wp) {
  wp.validate();
  detail::check_watermark_models(mm, embedder, mapper);
  for (TokenId t : text)
    if (t >= mm.vocab_size()) throw MismatchError("candidate token outside vocabulary");

  DetectionReport rep;
  rep.token_count = text.size();
  rep.short_text = text.size() < wp.measure_threshold;
  rep.alpha = wp.alpha;
  rep.delta = wp.delta;
  rep.measure_threshold = wp.measure_threshold;
  rep.in_w.assign(text.size(), 0);
  rep.contributions.assign(text.size(), 0.0);

  std::vector<uint8_t> vhat_opening;
  if (wp.measure_threshold > 0)
    vhat_opening = binarize(mapper.forward(embedder.embed(wp.opening)));

  EmbedAccumulator prefix(embedder);
  double total = 0.0;
  for (size_t i = 0; i < text.size(); ++i) {
    const size_t step = i + 1;
    const std::span<const TokenId> before(text.data(), i);
    bool in_w = false;
    const uint8_t* active_vhat = nullptr;
    std::vector<uint8_t> vhat;
    if (step <= wp.measure_threshold) {
      in_w = true;
      active_vhat = vhat_opening.data();
    } else if (gate_entropy(mm, before) >= wp.alpha) {
      in_w = true;
      vhat = binarize(mapper.forward(prefix.embedding()));
      active_vhat = vhat.data();
    }
    if (in_w) {
      rep.in_w[i] = 1;
      ++rep.w_count;
      rep.contributions[i] = wp.delta * static_cast<double>(active_vhat[text[i]]);
      total += rep.contributions[i];
    }
    prefix.push(text[i]);
  }
  if (rep.w_count > 0) {
    rep.status = DetectStatus::kOk;
    rep.score = total / static_cast<double>(rep.w_count);
  }
  return rep;
}

inline void write_trace(std::ostream& out, const GenerationTrace& trace) {
  out << "awm-trace v1\n";
  out << "tokens " << trace.tokens.size() << "\n";
  out << std::fixed << std::setprecision(6);
  for (size_t i = 0; i < trace.tokens.size(); ++i) {
    const StepRecord& s = trace.steps[i];
    out << "t " << trace.tokens[i] << " wm " << (s.watermarked ? 1 : 0) << " h ";
    if (s.has_entropy)
      out << s.entropy;
    else
      out << "-";
    out << " g " << (s.green ? 1 : 0) << "\n";
  }
}

inline void write_report(std::ostream& out, const DetectionReport& rep) {
  out << "awm-detection v1\n";
  out << "status " << (rep.status == DetectStatus::kOk ? "ok" : "inconclusive") << "\n";
  out << std::fixed << std::setprecision(6);
  out << "score " << rep.score << "\n";
  out << "w_count " << rep.w_count << "\n";
  out << "tokens " << rep.token_count << "\n";
  out << "short_text " << (rep.short_text ? 1 : 0) << "\n";
  out << "alpha " << rep.alpha << "\n";
  out << "delta " << rep.delta << "\n";
  out << "measure_threshold " << rep.measure_threshold << "\n";
}

}  // namespace awm
