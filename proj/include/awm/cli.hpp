#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "awm/config.hpp"
#include "awm/corpus.hpp"
#include "awm/errors.hpp"
#include "awm/experiment.hpp"
#include "awm/io.hpp"
#include "awm/mapper_train.hpp"

namespace awm {

enum ExitCode {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInput = 3,
  kExitMismatch = 4,
  kExitInconclusive = 5,
};

namespace cli_detail {

inline std::string hex16(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance sidecar next to every produced artifact.
inline void write_manifest(const std::string& artifact, const std::string& command,
                           uint64_t config_hash) {
  std::ostringstream os;
  os << "path " << artifact << "\n";
  os << "hash " << hex16(hash_file(artifact)) << "\n";
  os << "command " << command << "\n";
  os << "config_hash " << hex16(config_hash) << "\n";
  os << "timestamp " << iso_now() << "\n";
  write_text_file(artifact + ".manifest", os.str());
}

// One flat bag of flag values; std::optional distinguishes "given" from
// "defaulted" so flags can override config-file keys.
struct Flags {
  std::string command;
  std::optional<std::string> config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> in;
  std::optional<std::string> corpus;
  std::optional<std::string> vocab;
  std::optional<std::string> lm;
  std::optional<std::string> mm;
  std::optional<std::string> eval;
  std::optional<std::string> mapper;
  std::optional<std::string> role;
  std::optional<uint64_t> order;
  std::optional<double> smoothing_k;
  std::optional<std::string> scheme;
  std::optional<double> alpha;
  std::optional<double> delta;
  std::optional<uint64_t> measure_threshold;
  std::optional<uint64_t> top_k;
  std::optional<double> top_p;
  std::optional<uint64_t> max_tokens;
  std::optional<std::string> opening_file;
  std::optional<std::string> opening_text;  // shell-visible override, discouraged
  std::optional<std::string> prompt_file;
  std::optional<std::string> trace_out;
  std::optional<uint64_t> n_texts;
};

// Flag-over-config resolution for everything a command can need.
struct Session {
  Config cfg;
  uint64_t seed = 1;
  std::string command;

  std::string str(const std::string& key, const std::string& fallback) const {
    return cfg.get_string(key, fallback);
  }

  TokenizerMode tokenizer() const {
    return tokenizer_mode_from_string(cfg.get_string("corpus.tokenizer", "char"));
  }

  size_t max_vocab() const { return cfg.get_size("corpus.max_vocab", 5000); }
  size_t holdout_every() const { return cfg.get_size("corpus.holdout_every", 5); }

  SamplerParams sampler() const {
    SamplerParams sp;
    sp.top_k = cfg.get_size("watermark.top_k", 50);
    sp.top_p = cfg.get_double("watermark.top_p", 0.9);
    return sp;
  }

  WatermarkParams watermark(const Vocabulary& vocab, TokenizerMode mode,
                            bool need_opening) const {
    WatermarkParams wp;
    wp.alpha = cfg.get_double("watermark.alpha", 2.0);
    wp.delta = cfg.get_double("watermark.delta", 1.5);
    wp.measure_threshold = cfg.get_size("watermark.measure_threshold", 50);
    wp.sampler = sampler();
    wp.max_tokens = cfg.get_size("watermark.max_tokens", 200);
    // Callers that bypass the measurement phase (plain and KGW schemes) use
    // these params for the sampler only; without an opening sentence a
    // nonzero threshold would be unsatisfiable.
    if (!need_opening) wp.measure_threshold = 0;
    if (need_opening && wp.measure_threshold > 0) {
      if (cfg.has("watermark.opening_text")) {
        wp.opening = tokenize(vocab, cfg.require_string("watermark.opening_text"), mode);
      } else {
        const std::string path = cfg.require_string("watermark.opening_file");
        for (const auto& line : read_lines(path)) {
          if (line.empty()) continue;
          wp.opening = tokenize(vocab, line, mode);
          break;
        }
        if (wp.opening.empty()) throw IoError("opening sentence file is empty: " + path);
      }
    }
    wp.validate();
    return wp;
  }

  KGWParams kgw() const {
    KGWParams kp;
    kp.gamma = cfg.get_double("kgw.gamma", 0.5);
    kp.delta_add = cfg.get_double("kgw.delta_add", 2.0);
    const std::string s = cfg.get_string("kgw.scheme", "kgw0");
    kp.scheme = s == "kgw1" ? KGWScheme::kPrevTokenHash : KGWScheme::kFixedKey;
    kp.key = cfg.get_u64("kgw.key", derive_seed(seed, "kgw-key"));
    kp.validate();
    return kp;
  }

  uint64_t embedder_seed() const {
    return cfg.get_u64("embedder.seed", derive_seed(seed, "embedder"));
  }

  size_t embedder_dim() const {
    return cfg.get_size("embedder.dim", SentenceEmbedder::kDefaultDim);
  }
};

inline Session make_session(const Flags& f) {
  Session s;
  s.command = f.command;
  if (f.config_path) s.cfg = Config::from_file(*f.config_path);
  auto set_if = [&](const std::string& key, const auto& opt) {
    if (opt) {
      std::ostringstream os;
      os << std::setprecision(17) << *opt;
      s.cfg.set(key, os.str());
    }
  };
  set_if("corpus.path", f.corpus);
  set_if("paths.vocab", f.vocab);
  set_if("paths.lm", f.lm);
  set_if("paths.mm", f.mm);
  set_if("paths.eval", f.eval);
  set_if("paths.mapper", f.mapper);
  set_if("io.in", f.in);
  set_if("io.out", f.out);
  set_if("io.trace_out", f.trace_out);
  set_if("lm.role", f.role);
  set_if("lm.order", f.order);
  set_if("lm.k", f.smoothing_k);
  set_if("watermark.alpha", f.alpha);
  set_if("watermark.delta", f.delta);
  set_if("watermark.measure_threshold", f.measure_threshold);
  set_if("watermark.top_k", f.top_k);
  set_if("watermark.top_p", f.top_p);
  set_if("watermark.max_tokens", f.max_tokens);
  set_if("watermark.opening_file", f.opening_file);
  set_if("watermark.opening_text", f.opening_text);
  set_if("generate.prompt_file", f.prompt_file);
  set_if("generate.n", f.n_texts);
  if (f.scheme) {
    s.cfg.set("generate.scheme", *f.scheme);
    s.cfg.set("experiment.scheme", *f.scheme);
    s.cfg.set("spoof.scheme", *f.scheme);
  }
  if (f.seed) s.cfg.set("seed", std::to_string(*f.seed));
  s.seed = s.cfg.get_u64("seed", 1);
  return s;
}

struct CorpusBundle {
  Vocabulary vocab;
  TokenizerMode mode;
  Corpus train;    // main split
  Corpus holdout;  // evaluation split
};

/// Loads the corpus, reusing the vocabulary file when present (building and
/// saving it otherwise), and splits lines into train/holdout.
inline CorpusBundle load_corpus(const Session& s) {
  const std::string path = s.cfg.require_string("corpus.path");
  const auto lines = read_lines(path);
  const TokenizerMode mode = s.tokenizer();
  const std::string vocab_path = s.cfg.require_string("paths.vocab");
  Vocabulary vocab = std::filesystem::exists(vocab_path)
                         ? Vocabulary::load(vocab_path)
                         : build_vocabulary(lines, VocabBuildOptions{mode, s.max_vocab()});
  if (!std::filesystem::exists(vocab_path)) vocab.save(vocab_path);
  const auto [main_lines, holdout_lines] = split_lines(lines, s.holdout_every());
  CorpusBundle b{std::move(vocab), mode, Corpus{}, Corpus{}};
  b.train = make_corpus(b.vocab, main_lines, mode);
  b.holdout = make_corpus(b.vocab, holdout_lines, mode);
  return b;
}

inline NGramModel load_model(const std::string& path, const Vocabulary& vocab) {
  NGramModel m = NGramModel::load(path);
  m.verify_vocab(vocab);
  return m;
}

inline SemanticMapper load_mapper_checked(const std::string& path, const Vocabulary& vocab) {
  SemanticMapper m = SemanticMapper::load(path);
  if (m.out_dim() != vocab.size())
    throw MismatchError("mapper output size does not match vocabulary");
  return m;
}

inline int cmd_train_lm(const Session& s) {
  CorpusBundle b = load_corpus(s);
  const std::string role = s.str("lm.role", "generator");
  size_t order = 3;
  const Corpus* corpus = &b.train;
  if (role == "generator") {
    order = 3;
  } else if (role == "measurement") {
    order = 2;
  } else if (role == "evaluator") {
    order = 4;
    corpus = &b.holdout;
  } else {
    throw IoError("unknown lm role: " + role);
  }
  order = s.cfg.get_size("lm.order", order);
  const double k = s.cfg.get_double("lm.k", 0.5);
  const NGramModel m = NGramModel::train(*corpus, b.vocab, order, k);
  const std::string out = s.cfg.require_string("io.out");
  m.save(out);
  write_manifest(out, "train-lm", s.cfg.content_hash());
  std::cout << "trained " << role << " lm order " << order << " vocab " << b.vocab.size()
            << " -> " << out << "\n";
  return kExitOk;
}

inline int cmd_train_mapper(const Session& s) {
  CorpusBundle b = load_corpus(s);
  const SentenceEmbedder embedder(b.vocab.size(), s.embedder_dim(), s.embedder_seed());
  TrainConfig cfg;
  cfg.batch = s.cfg.get_size("mapper.batch", 128);
  cfg.learning_rate = s.cfg.get_double("mapper.learning_rate", 1e-2);
  cfg.epochs = s.cfg.get_size("mapper.epochs", 20);
  cfg.tau = s.cfg.get_double("mapper.tau", 0.1);
  cfg.hidden = s.cfg.get_size("mapper.hidden", SemanticMapper::kDefaultHidden);
  cfg.pair_samples = s.cfg.get_size("mapper.pair_samples", 512);
  cfg.calibration_pairs = s.cfg.get_size("mapper.calibration_pairs", 1000);
  cfg.weights.smooth = s.cfg.get_double("mapper.weight_smooth", 1.0);
  cfg.weights.balance = s.cfg.get_double("mapper.weight_balance", 1.0);
  cfg.weights.token_bias = s.cfg.get_double("mapper.weight_token_bias", 1.0);
  cfg.weights.contrastive = s.cfg.get_double("mapper.weight_contrastive", 1.0);
  cfg.augment.substitute = s.cfg.get_double("mapper.aug_substitute", 0.1);
  cfg.augment.erase = s.cfg.get_double("mapper.aug_erase", 0.1);
  cfg.augment.insert = s.cfg.get_double("mapper.aug_insert", 0.1);
  cfg.seed = s.seed;
  const SemanticMapper m = train_mapper(b.train, embedder, cfg, &std::cout);
  const std::string out = s.cfg.require_string("io.out");
  m.save(out);
  write_manifest(out, "train-mapper", s.cfg.content_hash());
  std::cout << "trained mapper " << m.in_dim() << "x" << m.hidden() << "x" << m.out_dim()
            << " -> " << out << "\n";
  return kExitOk;
}

struct WatermarkStack {
  CorpusBundle corpus;
  NGramModel lm;
  NGramModel mm;
  std::optional<NGramModel> evaluator;
  SemanticMapper mapper;
  SentenceEmbedder embedder;
};

inline WatermarkStack load_stack(const Session& s, bool need_lm) {
  CorpusBundle b = load_corpus(s);
  NGramModel mm = load_model(s.cfg.require_string("paths.mm"), b.vocab);
  NGramModel lm = need_lm || s.cfg.has("paths.lm")
                      ? load_model(s.cfg.require_string("paths.lm"), b.vocab)
                      : mm;
  std::optional<NGramModel> evaluator;
  if (s.cfg.has("paths.eval"))
    evaluator = load_model(s.cfg.require_string("paths.eval"), b.vocab);
  SemanticMapper mapper = load_mapper_checked(s.cfg.require_string("paths.mapper"), b.vocab);
  SentenceEmbedder embedder(b.vocab.size(), mapper.in_dim(), mapper.embedder_seed());
  return WatermarkStack{std::move(b), std::move(lm),       std::move(mm),
                        std::move(evaluator), std::move(mapper), std::move(embedder)};
}

inline std::vector<std::vector<TokenId>> load_prompts(const Session& s,
                                                      const Vocabulary& vocab,
                                                      TokenizerMode mode) {
  std::vector<std::vector<TokenId>> prompts;
  if (s.cfg.has("generate.prompt_file")) {
    for (const auto& line : read_lines(s.cfg.require_string("generate.prompt_file"))) {
      if (line.empty()) continue;
      prompts.push_back(tokenize(vocab, line, mode));
    }
  }
  return prompts;
}

inline int cmd_generate(const Session& s) {
  WatermarkStack st = load_stack(s, true);
  const std::string scheme = s.str("generate.scheme", "adaptive");
  const size_t n = s.cfg.get_size("generate.n", 1);
  const auto prompts = load_prompts(s, st.corpus.vocab, st.corpus.mode);
  const WatermarkParams wp = s.watermark(st.corpus.vocab, st.corpus.mode, scheme == "adaptive");
  const KGWParams kp = s.kgw();

  std::ostringstream texts;
  std::ostringstream traces;
  for (size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(s.seed, "gen:" + std::to_string(i)));
    std::vector<TokenId> prompt;
    if (!prompts.empty()) prompt = prompts[i % prompts.size()];
    std::vector<TokenId> tokens;
    if (scheme == "adaptive") {
      GenerationTrace tr = generate_watermarked(st.lm, st.mm, st.embedder, st.mapper, prompt,
                                                wp, rng);
      tokens = tr.tokens;
      write_trace(traces, tr);
    } else if (scheme == "plain") {
      tokens = generate_plain(st.lm, prompt, wp.sampler, wp.max_tokens, rng);
    } else if (scheme == "kgw0" || scheme == "kgw1") {
      KGWParams kgw_params = kp;
      kgw_params.scheme = scheme == "kgw0" ? KGWScheme::kFixedKey : KGWScheme::kPrevTokenHash;
      tokens = kgw_generate(st.lm, prompt, kgw_params, wp.sampler, wp.max_tokens, rng);
    } else {
      throw IoError("unknown generation scheme: " + scheme);
    }
    texts << detokenize(st.corpus.vocab, tokens, st.corpus.mode) << "\n";
  }

  const std::string out = s.cfg.require_string("io.out");
  write_text_file(out, texts.str());
  write_manifest(out, "generate", s.cfg.content_hash());
  if (s.cfg.has("io.trace_out") && scheme == "adaptive") {
    const std::string tout = s.cfg.require_string("io.trace_out");
    write_text_file(tout, traces.str());
    write_manifest(tout, "generate", s.cfg.content_hash());
  }
  std::cout << "generated " << n << " " << scheme << " text(s) -> " << out << "\n";
  return kExitOk;
}

inline int cmd_detect(const Session& s) {
  WatermarkStack st = load_stack(s, false);
  const WatermarkParams wp = s.watermark(st.corpus.vocab, st.corpus.mode, true);
  const auto lines = read_lines(s.cfg.require_string("io.in"));

  std::vector<std::string> nonempty;
  for (const auto& l : lines)
    if (!l.empty()) nonempty.push_back(l);
  if (nonempty.empty()) throw IoError("no text to detect");

  std::ostringstream reports;
  bool any_inconclusive = false;
  for (size_t i = 0; i < nonempty.size(); ++i) {
    const auto tokens = tokenize(st.corpus.vocab, nonempty[i], st.corpus.mode);
    const DetectionReport rep =
        detect_watermark(tokens, st.mm, st.embedder, st.mapper, wp);
    write_report(reports, rep);
    if (nonempty.size() > 1) std::cout << "text " << i << " ";
    std::cout << std::fixed << std::setprecision(6) << "score " << rep.score << " status "
              << (rep.status == DetectStatus::kOk ? "ok" : "inconclusive") << " w_count "
              << rep.w_count << "\n";
    if (rep.status != DetectStatus::kOk) any_inconclusive = true;
  }
  if (s.cfg.has("io.out")) {
    const std::string out = s.cfg.require_string("io.out");
    write_text_file(out, reports.str());
    write_manifest(out, "detect", s.cfg.content_hash());
  }
  return any_inconclusive ? kExitInconclusive : kExitOk;
}

inline ParaphraseParams attack_params(const Session& s) {
  ParaphraseParams pp;
  pp.substitute = s.cfg.get_double("attack.substitute", 0.1);
  pp.erase = s.cfg.get_double("attack.erase", 0.05);
  pp.insert = s.cfg.get_double("attack.insert", 0.05);
  pp.shuffle_window = s.cfg.get_size("attack.shuffle_window", 0);
  pp.validate();
  return pp;
}

inline int cmd_evaluate(const Session& s) {
  WatermarkStack st = load_stack(s, true);
  ExperimentSpec spec;
  spec.scheme = scheme_from_string(s.str("experiment.scheme", "adaptive"));
  spec.samples_per_class = s.cfg.get_size("experiment.samples_per_class", 100);
  spec.text_len = s.cfg.get_size("experiment.text_len", 200);
  spec.text_len_jitter = s.cfg.get_size("experiment.text_len_jitter", 30);
  spec.prompt_len = s.cfg.get_size("experiment.prompt_len", 8);
  spec.seed = s.seed;
  spec.wp = s.watermark(st.corpus.vocab, st.corpus.mode, spec.scheme == Scheme::kAdaptive);
  spec.kp = s.kgw();
  spec.green_stats = s.cfg.get_bool("experiment.green_stats", true);
  spec.repetition_max_n = s.cfg.get_size("experiment.repetition_max_n", 4);
  if (s.cfg.get_bool("experiment.attack", false)) spec.attack = attack_params(s);

  ModelSet models;
  models.lm = &st.lm;
  models.mm = &st.mm;
  models.evaluator = st.evaluator ? &*st.evaluator : nullptr;
  models.embedder = &st.embedder;
  models.mapper = &st.mapper;
  models.prompts = &st.corpus.train;

  const MetricsReport rep = run_experiment(spec, models);

  const std::string out = s.cfg.require_string("io.out");
  {
    std::ostringstream os;
    write_metrics_report(os, rep);
    write_text_file(out, os.str());
  }
  write_manifest(out, "evaluate", s.cfg.content_hash());
  {
    std::ostringstream os;
    write_samples_csv(os, rep.samples);
    write_text_file(out + ".samples.csv", os.str());
  }
  {
    std::ostringstream os;
    write_roc_csv(os, rep.roc_points);
    write_text_file(out + ".roc.csv", os.str());
  }
  std::cout << std::fixed << std::setprecision(6);
  std::cout << "roc_auc " << rep.roc_auc << "\n";
  std::cout << "best_f1 " << rep.best_f1 << "\n";
  std::cout << "awr " << rep.awr << "\n";
  std::cout << "report -> " << out << "\n";
  return kExitOk;
}

inline int cmd_attack(const Session& s) {
  CorpusBundle b = load_corpus(s);
  NGramModel mm = load_model(s.cfg.require_string("paths.mm"), b.vocab);
  // The embedder is only a similarity oracle here; reuse the mapper's table
  // when available, otherwise derive one from config.
  size_t dim = s.embedder_dim();
  uint64_t eseed = s.embedder_seed();
  if (s.cfg.has("paths.mapper")) {
    const SemanticMapper m = load_mapper_checked(s.cfg.require_string("paths.mapper"), b.vocab);
    dim = m.in_dim();
    eseed = m.embedder_seed();
  }
  const SentenceEmbedder embedder(b.vocab.size(), dim, eseed);

  const auto lines = read_lines(s.cfg.require_string("io.in"));
  ParaphraseParams pp = attack_params(s);
  std::ostringstream out_text;
  size_t idx = 0;
  for (const auto& line : lines) {
    if (line.empty()) {
      out_text << "\n";
      continue;
    }
    ParaphraseParams line_pp = pp;
    line_pp.seed = derive_seed(s.seed, "attack:" + std::to_string(idx));
    const auto tokens = tokenize(b.vocab, line, b.mode);
    const auto attacked = paraphrase_attack(tokens, line_pp, mm, embedder);
    out_text << detokenize(b.vocab, attacked, b.mode) << "\n";
    ++idx;
  }
  const std::string out = s.cfg.require_string("io.out");
  write_text_file(out, out_text.str());
  write_manifest(out, "attack", s.cfg.content_hash());
  std::cout << "attacked " << idx << " text(s) -> " << out << "\n";
  return kExitOk;
}

inline int cmd_spoof(const Session& s) {
  const std::string scheme_str = s.str("spoof.scheme", "adaptive");
  const Scheme scheme = scheme_from_string(scheme_str);
  WatermarkStack st = load_stack(s, true);

  SpoofRunSpec spec;
  spec.scheme = scheme;
  spec.sc.generations = s.cfg.get_size("spoof.generations", 5000);
  spec.sc.pool_size = s.cfg.get_size("spoof.pool", 181);
  spec.sc.top_h = s.cfg.get_size("spoof.top_h", 50);
  spec.sc.text_len = s.cfg.get_size("spoof.text_len", 40);
  spec.seed = s.seed;
  spec.wp = s.watermark(st.corpus.vocab, st.corpus.mode, scheme == Scheme::kAdaptive);
  spec.kp = s.kgw();
  if (scheme == Scheme::kKgw1) spec.kp.scheme = KGWScheme::kPrevTokenHash;
  if (scheme == Scheme::kKgw0) spec.kp.scheme = KGWScheme::kFixedKey;
  spec.prompt_len = s.cfg.get_size("spoof.prompt_len", 4);

  ModelSet models;
  models.lm = &st.lm;
  models.mm = &st.mm;
  models.embedder = &st.embedder;
  models.mapper = &st.mapper;
  models.prompts = &st.corpus.train;

  const SpoofOutcome outcome = run_spoof(spec, models, st.corpus.train);
  if (outcome.pool_shrunk)
    std::cerr << "warning: fewer distinct corpus tokens than requested pool size; pool shrunk to "
              << outcome.result.pool_used << "\n";
  std::cout << std::fixed << std::setprecision(6) << "scheme " << scheme_str
            << " decryption_rate " << outcome.result.decryption_rate << "\n";
  if (s.cfg.has("io.out")) {
    const std::string out = s.cfg.require_string("io.out");
    std::ostringstream os;
    write_spoof_report(os, outcome);
    write_text_file(out, os.str());
    write_manifest(out, "spoof", s.cfg.content_hash());
  }
  return kExitOk;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  using cli_detail::Flags;
  Flags f;

  CLI::App app{"adaptive watermark toolkit for n-gram language models", "awm"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config_path, "key-value config file");
    cmd->add_option("--seed", f.seed, "global seed; all randomness derives from it");
    cmd->add_option("--out", f.out, "output path");
    cmd->add_option("--corpus", f.corpus, "corpus file, one document per line");
    cmd->add_option("--vocab", f.vocab, "vocabulary file (built on first use)");
  };
  auto add_watermark_flags = [&](CLI::App* cmd) {
    cmd->add_option("--alpha", f.alpha, "entropy gate threshold in nats");
    cmd->add_option("--delta", f.delta, "watermark strength");
    cmd->add_option("--measure-threshold", f.measure_threshold,
                    "tokens keyed by the opening sentence");
    cmd->add_option("--top-k", f.top_k, "sampler top-k");
    cmd->add_option("--top-p", f.top_p, "sampler top-p");
    cmd->add_option("--max-tokens", f.max_tokens, "tokens per generation");
    cmd->add_option("--opening-sentence-file", f.opening_file,
                    "file holding the secret opening sentence");
    cmd->add_option("--opening-sentence", f.opening_text,
                    "opening sentence on the command line (visible in shell history)");
  };
  auto add_model_flags = [&](CLI::App* cmd, bool with_eval) {
    cmd->add_option("--lm", f.lm, "generator model file");
    cmd->add_option("--mm", f.mm, "measurement model file");
    cmd->add_option("--mapper", f.mapper, "semantic mapper file");
    if (with_eval) cmd->add_option("--eval", f.eval, "evaluation model file");
  };

  CLI::App* train_lm = app.add_subcommand("train-lm", "fit an n-gram model");
  add_common(train_lm);
  train_lm->add_option("--role", f.role, "generator | measurement | evaluator");
  train_lm->add_option("--order", f.order, "n-gram order");
  train_lm->add_option("--k", f.smoothing_k, "add-k smoothing constant");

  CLI::App* train_mapper = app.add_subcommand("train-mapper", "train the semantic mapper");
  add_common(train_mapper);

  CLI::App* generate = app.add_subcommand("generate", "generate (watermarked) text");
  add_common(generate);
  add_model_flags(generate, false);
  add_watermark_flags(generate);
  generate->add_option("--scheme", f.scheme, "adaptive | plain | kgw0 | kgw1");
  generate->add_option("--n", f.n_texts, "number of texts");
  generate->add_option("--prompt-file", f.prompt_file, "prompts, one per line");
  generate->add_option("--trace-out", f.trace_out, "write per-token generation traces");

  CLI::App* detect = app.add_subcommand("detect", "score candidate text for the watermark");
  add_common(detect);
  add_model_flags(detect, false);
  add_watermark_flags(detect);
  detect->add_option("--in", f.in, "candidate text file (one text per line)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "run the metric battery");
  add_common(evaluate);
  add_model_flags(evaluate, true);
  add_watermark_flags(evaluate);
  evaluate->add_option("--scheme", f.scheme, "adaptive | kgw0 | kgw1");

  CLI::App* attack = app.add_subcommand("attack", "paraphrase texts with token edits");
  add_common(attack);
  add_model_flags(attack, false);
  attack->add_option("--in", f.in, "text file to attack");

  CLI::App* spoof = app.add_subcommand("spoof", "frequency-analysis spoofing attack");
  add_common(spoof);
  add_model_flags(spoof, false);
  add_watermark_flags(spoof);
  spoof->add_option("--scheme", f.scheme, "adaptive | kgw0 | kgw1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  f.command = sub->get_name();
  try {
    const cli_detail::Session s = cli_detail::make_session(f);
    if (f.command == "train-lm") return cli_detail::cmd_train_lm(s);
    if (f.command == "train-mapper") return cli_detail::cmd_train_mapper(s);
    if (f.command == "generate") return cli_detail::cmd_generate(s);
    if (f.command == "detect") return cli_detail::cmd_detect(s);
    if (f.command == "evaluate") return cli_detail::cmd_evaluate(s);
    if (f.command == "attack") return cli_detail::cmd_attack(s);
    if (f.command == "spoof") return cli_detail::cmd_spoof(s);
    std::cerr << "unknown command: " << f.command << "\n";
    return kExitUsage;
  } catch (const MismatchError& e) {
    std::cerr << "model mismatch: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("awm");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace awm
