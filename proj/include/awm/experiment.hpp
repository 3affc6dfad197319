#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "awm/attack.hpp"
#include "awm/corpus.hpp"
#include "awm/embedder.hpp"
#include "awm/errors.hpp"
#include "awm/kgw.hpp"
#include "awm/mapper.hpp"
#include "awm/metrics.hpp"
#include "awm/ngram.hpp"
#include "awm/rng.hpp"
#include "awm/watermark.hpp"

namespace awm {

enum class Scheme { kAdaptive, kKgw0, kKgw1 };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kAdaptive: return "adaptive";
    case Scheme::kKgw0: return "kgw0";
    case Scheme::kKgw1: return "kgw1";
  }
  return "?";
}

inline Scheme scheme_from_string(std::string_view s) {
  if (s == "adaptive") return Scheme::kAdaptive;
  if (s == "kgw0") return Scheme::kKgw0;
  if (s == "kgw1") return Scheme::kKgw1;
  throw IoError("unknown scheme: " + std::string(s));
}

// Everything a run needs, already trained and vocabulary-checked. The
// evaluator is optional (no perplexity numbers without it); prompts provides
// per-text prompt material.
struct ModelSet {
  const NGramModel* lm = nullptr;
  const NGramModel* mm = nullptr;
  const NGramModel* evaluator = nullptr;
  const SentenceEmbedder* embedder = nullptr;
  const SemanticMapper* mapper = nullptr;
  const Corpus* prompts = nullptr;
};

struct ExperimentSpec {
  Scheme scheme = Scheme::kAdaptive;
  size_t samples_per_class = 100;
  size_t text_len = 200;
  size_t text_len_jitter = 30;
  size_t prompt_len = 8;
  uint64_t seed = 1;
  WatermarkParams wp;
  KGWParams kp;
  std::optional<ParaphraseParams> attack;  // applied to the watermarked class
  bool compute_ppl = true;
  bool green_stats = false;  // per-position v̂ tallies (extra mapper passes)
  size_t repetition_max_n = 4;

  void validate() const {
    if (samples_per_class < 2)
      throw IoError("evaluation needs at least 2 samples per class");
    if (text_len < 1) throw IoError("text length must be >= 1");
    if (text_len_jitter >= text_len) throw IoError("length jitter must be below the length");
  }
};

struct GreenStats {
  size_t green_in_w = 0;
  size_t w_count = 0;
  size_t green_total = 0;
  size_t total = 0;
};

/// Replays the detector's gate and evaluates v̂ at every position, not just
/// inside W, for the green-fraction tallies behind the security analysis.
inline GreenStats green_token_stats(std::span<const TokenId> text, const NGramModel& mm,
                                    const SentenceEmbedder& embedder,
                                    const SemanticMapper& mapper, const WatermarkParams& wp) {
  GreenStats gs;
  std::vector<uint8_t> vhat_opening;
  if (wp.measure_threshold > 0)
    vhat_opening = binarize(mapper.forward(embedder.embed(wp.opening)));
  EmbedAccumulator prefix(embedder);
  for (size_t i = 0; i < text.size(); ++i) {
    const size_t step = i + 1;
    const std::span<const TokenId> before(text.data(), i);
    const bool in_w = step <= wp.measure_threshold || gate_entropy(mm, before) >= wp.alpha;
    const std::vector<uint8_t> vhat = step <= wp.measure_threshold
                                          ? vhat_opening
                                          : binarize(mapper.forward(prefix.embedding()));
    const bool green = vhat[text[i]] != 0;
    ++gs.total;
    if (green) ++gs.green_total;
    if (in_w) {
      ++gs.w_count;
      if (green) ++gs.green_in_w;
    }
    prefix.push(text[i]);
  }
  return gs;
}

struct MetricsReport {
  Scheme scheme = Scheme::kAdaptive;
  size_t samples_per_class = 0;
  bool attacked = false;
  double roc_auc = 0.0;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  double tpr_at_1pct = 0.0;
  double tpr_at_10pct = 0.0;
  double awr = 0.0;
  double mean_score_wm = 0.0;
  double mean_score_human = 0.0;
  bool has_ppl = false;
  double mean_ppl_wm = 0.0, median_ppl_wm = 0.0;
  double mean_ppl_human = 0.0, median_ppl_human = 0.0;
  std::vector<double> repetition_wm;     // mean rate for n = 1..N
  std::vector<double> repetition_human;
  bool has_green = false;
  double green_among_w = 0.0;   // watermarked texts, detected positions
  double green_all_wm = 0.0;    // watermarked texts, all positions
  double green_all_human = 0.0; // human texts, all positions
  double time_gen_ms_median = 0.0;     // wall clock; excluded from determinism
  double time_detect_ms_median = 0.0;  // wall clock; excluded from determinism
  std::vector<ScoredSample> samples;
  std::vector<std::pair<double, double>> roc_points;
};

namespace detail {

inline std::vector<TokenId> pick_prompt(const Corpus& prompts, size_t len, Rng& rng) {
  const auto& doc = prompts.docs[rng.uniform_index(prompts.docs.size())];
  const size_t n = std::min(len, doc.size());
  return std::vector<TokenId>(doc.begin(), doc.begin() + n);
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace detail

// Full evaluation pass: generate both classes, optionally attack the
// watermarked class, score with the scheme's detector, and aggregate the
// metric battery. Deterministic per (spec, models) except the time_ fields.
inline MetricsReport run_experiment(const ExperimentSpec& spec, const ModelSet& models) {
  spec.validate();
  if (!models.lm || !models.mm || !models.prompts)
    throw IoError("experiment needs generator, measurement model, and prompt corpus");
  if (spec.scheme == Scheme::kAdaptive && (!models.embedder || !models.mapper))
    throw IoError("adaptive experiments need embedder and mapper");
  detail::check_same_vocab(*models.lm, *models.mm);
  if (models.evaluator) detail::check_same_vocab(*models.lm, *models.evaluator);
  if (spec.scheme == Scheme::kAdaptive)
    detail::check_watermark_models(*models.mm, *models.embedder, *models.mapper);

  MetricsReport rep;
  rep.scheme = spec.scheme;
  rep.samples_per_class = spec.samples_per_class;
  rep.attacked = spec.attack.has_value();

  std::vector<GenerationTrace> traces;
  std::vector<std::vector<TokenId>> wm_texts;      // as generated
  std::vector<std::vector<TokenId>> wm_detected;   // after optional attack
  std::vector<std::vector<TokenId>> human_texts;
  std::vector<double> gen_ms;

  for (size_t i = 0; i < spec.samples_per_class; ++i) {
    WatermarkParams wp = spec.wp;
    Rng prng(derive_seed(spec.seed, "prompt:wm:" + std::to_string(i)));
    const auto prompt = detail::pick_prompt(*models.prompts, spec.prompt_len, prng);
    const size_t len =
        spec.text_len - spec.text_len_jitter + prng.uniform_index(2 * spec.text_len_jitter + 1);
    wp.max_tokens = len;
    Rng grng(derive_seed(spec.seed, "gen:wm:" + std::to_string(i)));
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<TokenId> text;
    if (spec.scheme == Scheme::kAdaptive) {
      GenerationTrace tr = generate_watermarked(*models.lm, *models.mm, *models.embedder,
                                                *models.mapper, prompt, wp, grng);
      text = tr.tokens;
      traces.push_back(std::move(tr));
    } else {
      text = kgw_generate(*models.lm, prompt, spec.kp, wp.sampler, len, grng);
    }
    gen_ms.push_back(detail::ms_since(t0));

    std::vector<TokenId> detected = text;
    if (spec.attack) {
      ParaphraseParams pp = *spec.attack;
      pp.seed = derive_seed(spec.seed, "attack:" + std::to_string(i));
      detected = paraphrase_attack(detected, pp, *models.mm, *models.embedder);
    }
    wm_texts.push_back(std::move(text));
    wm_detected.push_back(std::move(detected));
  }

  for (size_t i = 0; i < spec.samples_per_class; ++i) {
    Rng prng(derive_seed(spec.seed, "prompt:human:" + std::to_string(i)));
    const auto prompt = detail::pick_prompt(*models.prompts, spec.prompt_len, prng);
    const size_t len =
        spec.text_len - spec.text_len_jitter + prng.uniform_index(2 * spec.text_len_jitter + 1);
    Rng grng(derive_seed(spec.seed, "gen:human:" + std::to_string(i)));
    human_texts.push_back(generate_plain(*models.lm, prompt, spec.wp.sampler, len, grng));
  }

  // Inconclusive detections (possible when the gate never fires) score 0:
  // absence of evidence of a watermark.
  std::vector<double> detect_ms;
  auto score_text = [&](std::span<const TokenId> text, bool* conclusive) -> double {
    const auto t0 = std::chrono::steady_clock::now();
    double score = 0.0;
    bool ok = true;
    if (spec.scheme == Scheme::kAdaptive) {
      const DetectionReport dr =
          detect_watermark(text, *models.mm, *models.embedder, *models.mapper, spec.wp);
      ok = dr.status == DetectStatus::kOk;
      score = ok ? dr.score : 0.0;
    } else {
      const KGWDetection d = kgw_detect(text, spec.kp, models.lm->vocab_size());
      ok = d.ok;
      score = d.ok ? d.score : 0.0;
    }
    detect_ms.push_back(detail::ms_since(t0));
    if (conclusive) *conclusive = ok;
    return score;
  };

  std::vector<double> wm_scores, human_scores;
  for (size_t i = 0; i < spec.samples_per_class; ++i) {
    bool ok = true;
    const double s = score_text(wm_detected[i], &ok);
    wm_scores.push_back(s);
    ScoredSample row{s, true, std::string("wm:") + scheme_name(spec.scheme) +
                                  (spec.attack ? ":attacked" : "") +
                                  (ok ? "" : ":inconclusive")};
    rep.samples.push_back(std::move(row));
  }
  for (size_t i = 0; i < spec.samples_per_class; ++i) {
    bool ok = true;
    const double s = score_text(human_texts[i], &ok);
    human_scores.push_back(s);
    rep.samples.push_back(ScoredSample{s, false,
                                       std::string("human") + (ok ? "" : ":inconclusive")});
  }

  rep.roc_auc = roc_auc(wm_scores, human_scores);
  const auto f1 = best_f1(wm_scores, human_scores);
  rep.best_f1 = f1.first;
  rep.best_f1_threshold = f1.second;
  rep.tpr_at_1pct = tpr_at_fpr(wm_scores, human_scores, 0.01);
  rep.tpr_at_10pct = tpr_at_fpr(wm_scores, human_scores, 0.10);
  rep.mean_score_wm = mean(wm_scores);
  rep.mean_score_human = mean(human_scores);
  rep.awr = spec.scheme == Scheme::kAdaptive ? awr(traces) : 1.0;

  if (spec.compute_ppl && models.evaluator) {
    rep.has_ppl = true;
    std::vector<double> pw, ph;
    for (const auto& t : wm_texts) pw.push_back(models.evaluator->perplexity(t));
    for (const auto& t : human_texts) ph.push_back(models.evaluator->perplexity(t));
    rep.mean_ppl_wm = mean(pw);
    rep.median_ppl_wm = median(pw);
    rep.mean_ppl_human = mean(ph);
    rep.median_ppl_human = median(ph);
  }

  for (size_t n = 1; n <= spec.repetition_max_n; ++n) {
    std::vector<double> rw, rh;
    for (const auto& t : wm_texts)
      if (t.size() >= n) rw.push_back(repetition_rate(t, n));
    for (const auto& t : human_texts)
      if (t.size() >= n) rh.push_back(repetition_rate(t, n));
    rep.repetition_wm.push_back(rw.empty() ? 0.0 : mean(rw));
    rep.repetition_human.push_back(rh.empty() ? 0.0 : mean(rh));
  }

  if (spec.green_stats && spec.scheme == Scheme::kAdaptive) {
    rep.has_green = true;
    GreenStats wm_stats, human_stats;
    for (const auto& t : wm_detected) {
      const GreenStats g = green_token_stats(t, *models.mm, *models.embedder, *models.mapper,
                                             spec.wp);
      wm_stats.green_in_w += g.green_in_w;
      wm_stats.w_count += g.w_count;
      wm_stats.green_total += g.green_total;
      wm_stats.total += g.total;
    }
    for (const auto& t : human_texts) {
      const GreenStats g = green_token_stats(t, *models.mm, *models.embedder, *models.mapper,
                                             spec.wp);
      human_stats.green_total += g.green_total;
      human_stats.total += g.total;
    }
    rep.green_among_w = wm_stats.w_count == 0 ? 0.0
                                              : static_cast<double>(wm_stats.green_in_w) /
                                                    static_cast<double>(wm_stats.w_count);
    rep.green_all_wm = wm_stats.total == 0 ? 0.0
                                           : static_cast<double>(wm_stats.green_total) /
                                                 static_cast<double>(wm_stats.total);
    rep.green_all_human = human_stats.total == 0
                              ? 0.0
                              : static_cast<double>(human_stats.green_total) /
                                    static_cast<double>(human_stats.total);
  }

  rep.roc_points = roc_curve(wm_scores, human_scores);
  rep.time_gen_ms_median = median(gen_ms);
  rep.time_detect_ms_median = median(detect_ms);
  return rep;
}

// Lines beginning "time_" carry wall-clock values and are the only
// nondeterministic content; consumers comparing runs must drop them.
inline void write_metrics_report(std::ostream& out, const MetricsReport& rep) {
  out << "awm-metrics v1\n";
  out << "scheme " << scheme_name(rep.scheme) << "\n";
  out << "samples_per_class " << rep.samples_per_class << "\n";
  out << "attacked " << (rep.attacked ? 1 : 0) << "\n";
  out << std::fixed << std::setprecision(6);
  out << "roc_auc " << rep.roc_auc << "\n";
  out << "best_f1 " << rep.best_f1 << "\n";
  out << "best_f1_threshold " << rep.best_f1_threshold << "\n";
  out << "tpr_at_1pct_fpr " << rep.tpr_at_1pct << "\n";
  out << "tpr_at_10pct_fpr " << rep.tpr_at_10pct << "\n";
  out << "awr " << rep.awr << "\n";
  out << "mean_score_wm " << rep.mean_score_wm << "\n";
  out << "mean_score_human " << rep.mean_score_human << "\n";
  if (rep.has_ppl) {
    out << "mean_ppl_wm " << rep.mean_ppl_wm << "\n";
    out << "median_ppl_wm " << rep.median_ppl_wm << "\n";
    out << "mean_ppl_human " << rep.mean_ppl_human << "\n";
    out << "median_ppl_human " << rep.median_ppl_human << "\n";
  }
  for (size_t n = 0; n < rep.repetition_wm.size(); ++n)
    out << "repetition_" << (n + 1) << "gram_wm " << rep.repetition_wm[n] << "\n";
  for (size_t n = 0; n < rep.repetition_human.size(); ++n)
    out << "repetition_" << (n + 1) << "gram_human " << rep.repetition_human[n] << "\n";
  if (rep.has_green) {
    out << "green_among_w " << rep.green_among_w << "\n";
    out << "green_all_wm " << rep.green_all_wm << "\n";
    out << "green_all_human " << rep.green_all_human << "\n";
  }
  out << "time_gen_ms_median " << rep.time_gen_ms_median << "\n";
  out << "time_detect_ms_median " << rep.time_detect_ms_median << "\n";
}

inline void write_samples_csv(std::ostream& out, std::span<const ScoredSample> samples) {
  out << "index,label,score,provenance\n";
  out << std::fixed << std::setprecision(6);
  for (size_t i = 0; i < samples.size(); ++i)
    out << i << "," << (samples[i].watermarked ? "watermarked" : "human") << ","
        << samples[i].score << "," << samples[i].provenance << "\n";
}

inline void write_roc_csv(std::ostream& out,
                          std::span<const std::pair<double, double>> points) {
  out << "fpr,tpr\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& [fpr, tpr] : points) out << fpr << "," << tpr << "\n";
}

struct SpoofRunSpec {
  Scheme scheme = Scheme::kAdaptive;
  SpoofConfig sc;
  uint64_t seed = 1;
  WatermarkParams wp;  // adaptive scheme; measure_threshold 0 is the pure-gate regime
  KGWParams kp;
  size_t prompt_len = 4;
};

struct SpoofOutcome {
  SpoofResult result;
  Scheme scheme = Scheme::kAdaptive;
  bool pool_shrunk = false;
  std::optional<TokenId> prefix;  // KGW-1 conditioning token
};

// Spoofing harness. KGW schemes run the additive watermark as-is; the
// adaptive scheme runs in the strengthened regime: one fixed scaling vector
// (derived from the opening sentence's embedding) across all generations, so
// the attacker faces a stationary green set — their best case.
inline SpoofOutcome run_spoof(const SpoofRunSpec& spec, const ModelSet& models,
                              const Corpus& attack_corpus) {
  if (!models.lm || !models.mm || !models.prompts) throw IoError("spoofing needs models");
  spec.sc.validate();

  bool shrunk = false;
  std::vector<TokenId> pool =
      common_token_pool(attack_corpus, models.lm->vocab_size(), spec.sc.pool_size, &shrunk);

  SpoofOutcome out;
  out.scheme = spec.scheme;
  out.pool_shrunk = shrunk;

  auto prompt_for = [&](size_t g) {
    Rng prng(derive_seed(spec.seed, "spoof-prompt:" + std::to_string(g)));
    return detail::pick_prompt(*models.prompts, spec.prompt_len, prng);
  };

  if (spec.scheme == Scheme::kAdaptive) {
    if (!models.embedder || !models.mapper)
      throw IoError("adaptive spoofing needs embedder and mapper");
    detail::check_watermark_models(*models.mm, *models.embedder, *models.mapper);
    const std::vector<uint8_t> fixed_vhat =
        binarize(models.mapper->forward(models.embedder->embed(spec.wp.opening)));
    auto gen = [&](size_t g) {
      Rng rng(derive_seed(spec.seed, "spoof-gen:" + std::to_string(g)));
      return spoof_generate_adaptive_fixed(*models.lm, *models.mm, prompt_for(g), spec.wp,
                                           fixed_vhat, spec.sc.text_len, rng);
    };
    out.result = spoof_frequency_attack(gen, pool, fixed_vhat, spec.sc);
    return out;
  }

  const size_t vsize = models.lm->vocab_size();
  if (spec.scheme == Scheme::kKgw0) {
    const std::vector<uint8_t> green = kgw0_green_mask(spec.kp, vsize);
    auto gen = [&](size_t g) {
      Rng rng(derive_seed(spec.seed, "spoof-gen:" + std::to_string(g)));
      return kgw_generate(*models.lm, prompt_for(g), spec.kp, spec.wp.sampler,
                          spec.sc.text_len, rng);
    };
    out.result = spoof_frequency_attack(gen, pool, green, spec.sc);
    return out;
  }

  // KGW-1: analyze tokens following the most frequent corpus token, whose
  // hash determines one concrete green list.
  const TokenId prefix = pool.at(0);
  out.prefix = prefix;
  const std::vector<uint8_t> green = kgw1_green_mask(spec.kp, vsize, prefix);
  auto gen = [&](size_t g) {
    Rng rng(derive_seed(spec.seed, "spoof-gen:" + std::to_string(g)));
    return kgw_generate(*models.lm, prompt_for(g), spec.kp, spec.wp.sampler, spec.sc.text_len,
                        rng);
  };
  out.result = spoof_frequency_attack(gen, pool, green, spec.sc, prefix);
  return out;
}

inline void write_spoof_report(std::ostream& out, const SpoofOutcome& o) {
  out << "awm-spoof v1\n";
  out << "scheme " << scheme_name(o.scheme) << "\n";
  out << std::fixed << std::setprecision(6);
  out << "decryption_rate " << o.result.decryption_rate << "\n";
  out << "inferred_size " << o.result.inferred.size() << "\n";
  out << "pool_used " << o.result.pool_used << "\n";
  out << "pool_shrunk " << (o.pool_shrunk ? 1 : 0) << "\n";
  out << "observed " << o.result.observed << "\n";
  if (o.prefix) out << "prefix_token " << *o.prefix << "\n";
}

}  // namespace awm
