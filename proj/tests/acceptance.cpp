// Acceptance battery: twelve pass/fail checks over the full desk-scale
// pipeline, one line of output each. Returns nonzero if any check fails.
// An optional integer argument runs a single check (plus its dependencies).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "awm/awm.hpp"
#include "support/fixture.hpp"

using namespace awm;

namespace {

struct Outcome {
  int id;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Outcome> g_results;

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

void record(int id, bool pass, const std::string& detail, double seconds) {
  g_results.push_back({id, pass, detail, seconds});
  std::cout << "criterion " << id << (pass ? " PASS " : " FAIL ") << detail << "  ["
            << std::fixed << std::setprecision(1) << seconds << "s]\n";
  std::cout.flush();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

ExperimentSpec base_spec(Scheme scheme, uint64_t seed, double alpha) {
  const auto& w = fixture::world();
  ExperimentSpec spec;
  spec.scheme = scheme;
  spec.samples_per_class = 100;
  spec.text_len = 200;
  spec.text_len_jitter = 30;
  spec.prompt_len = 8;
  spec.seed = seed;
  spec.wp = w.watermark(alpha);
  spec.kp = w.kgw(scheme == Scheme::kKgw1 ? KGWScheme::kPrevTokenHash : KGWScheme::kFixedKey);
  spec.compute_ppl = false;
  spec.green_stats = false;
  return spec;
}

// Operating point for the headline runs. The gate threshold is tuned against
// the sweep below: 2.0 nats is the grid point where the watermark rate falls
// inside [0.5, 0.9], so a visible share of tokens stays untouched while
// detection stays saturated.
constexpr double kTunedAlpha = 2.0;

// 1: no-attack detection quality at the tuned gate.
const MetricsReport& no_attack_run() {
  static const MetricsReport rep = [] {
    ExperimentSpec spec = base_spec(Scheme::kAdaptive, 1, kTunedAlpha);
    spec.green_stats = true;
    return run_experiment(spec, fixture::world().models());
  }();
  return rep;
}

void criterion_1() {
  Timer t;
  const MetricsReport& r = no_attack_run();
  const bool pass =
      r.roc_auc >= 0.99 && r.best_f1 >= 0.97 && r.awr >= 0.5 && r.awr <= 0.9;
  record(1, pass,
         "no-attack detection auc=" + fmt(r.roc_auc) + " f1=" + fmt(r.best_f1) +
             " awr=" + fmt(r.awr) + " (need auc>=0.99 f1>=0.97 awr in [0.5,0.9])",
         t.seconds());
}

void criterion_2() {
  Timer t;
  bool pass = true;
  std::string detail = "paraphrase robustness";
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    ExperimentSpec ours = base_spec(Scheme::kAdaptive, seed, kTunedAlpha);
    ours.attack = ParaphraseParams{};  // 20% combined edit rate
    ExperimentSpec kgw1 = base_spec(Scheme::kKgw1, seed, kTunedAlpha);
    kgw1.attack = ParaphraseParams{};
    const double auc_ours = run_experiment(ours, fixture::world().models()).roc_auc;
    const double auc_kgw1 = run_experiment(kgw1, fixture::world().models()).roc_auc;
    pass = pass && auc_ours >= auc_kgw1 && auc_ours >= 0.85;
    detail += " s" + std::to_string(seed) + ":ours=" + fmt(auc_ours) +
              ",kgw1=" + fmt(auc_kgw1);
  }
  record(2, pass, detail + " (need ours>=kgw1 and ours>=0.85 on every seed)", t.seconds());
}

struct AlphaSweep {
  std::vector<double> awr;         // for alpha = 0,1,2,3
  double ppl_alpha0_median = 0.0;  // watermarked-text perplexity medians
  double ppl_alpha2_median = 0.0;
};

const AlphaSweep& alpha_sweep() {
  static const AlphaSweep sweep = [] {
    AlphaSweep s;
    const double alphas[] = {0.0, 1.0, 2.0, 3.0};
    for (double a : alphas) {
      ExperimentSpec spec = base_spec(Scheme::kAdaptive, 1, a);
      spec.compute_ppl = a == 0.0 || a == 2.0;
      const MetricsReport r = run_experiment(spec, fixture::world().models());
      s.awr.push_back(r.awr);
      if (a == 0.0) s.ppl_alpha0_median = r.median_ppl_wm;
      if (a == 2.0) s.ppl_alpha2_median = r.median_ppl_wm;
    }
    return s;
  }();
  return sweep;
}

void criterion_3() {
  Timer t;
  const AlphaSweep& s = alpha_sweep();
  const bool exact_one = s.awr[0] == 1.0;
  const bool monotone = s.awr[0] >= s.awr[1] && s.awr[1] >= s.awr[2] && s.awr[2] >= s.awr[3];
  const bool dropped = s.awr[0] - s.awr[3] >= 0.05;
  record(3, exact_one && monotone && dropped,
         "gate rate sweep awr(0..3)=" + fmt(s.awr[0]) + "," + fmt(s.awr[1]) + "," +
             fmt(s.awr[2]) + "," + fmt(s.awr[3]) +
             " (need awr(0)=1 exactly, non-increasing, total drop>=0.05)",
         t.seconds());
}

void criterion_4() {
  Timer t;
  const auto& w = fixture::world();
  const WatermarkParams wp = w.watermark(2.0);
  size_t checked = 0, agreed = 0;
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng root(derive_seed(seed, "replay"));
    for (int i = 0; i < 100; ++i) {
      Rng prng = root.fork("prompt:" + std::to_string(i));
      const auto prompt = detail::pick_prompt(w.train, 8, prng);
      Rng grng = root.fork("gen:" + std::to_string(i));
      const GenerationTrace tr =
          generate_watermarked(w.lm, w.mm, w.embedder, w.mapper, prompt, wp, grng);
      const DetectionReport rep = detect_watermark(tr.tokens, w.mm, w.embedder, w.mapper, wp);
      bool same = rep.in_w.size() == tr.steps.size();
      for (size_t k = 0; same && k < tr.steps.size(); ++k)
        same = static_cast<bool>(rep.in_w[k]) == tr.steps[k].watermarked;
      ++checked;
      agreed += same;
    }
  }
  record(4, checked == agreed,
         "gate replay agreement " + std::to_string(agreed) + "/" + std::to_string(checked) +
             " texts (need exact agreement on every text, every seed)",
         t.seconds());
}

struct MapperAudit {
  double median_sentence_imbalance = 0.0;  // |sum_k sign(v_k)| / |V|
  double median_token_bias = 0.0;          // |sum_S sign(v_k(S))| / n_sentences
};

MapperAudit audit_mapper(size_t n_sentences) {
  const auto& w = fixture::world();
  const size_t n = std::min(n_sentences, w.holdout.docs.size());
  const size_t vocab = w.vocab.size();
  std::vector<double> sentence_imbalance;
  std::vector<double> token_sums(vocab, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto v = w.mapper.forward(w.embedder.embed(w.holdout.docs[i]));
    double signsum = 0.0;
    for (size_t k = 0; k < vocab; ++k) {
      const double s = v[k] > 0.0 ? 1.0 : (v[k] < 0.0 ? -1.0 : 0.0);
      signsum += s;
      token_sums[k] += s;
    }
    sentence_imbalance.push_back(std::abs(signsum) / static_cast<double>(vocab));
  }
  std::vector<double> token_bias;
  token_bias.reserve(vocab);
  for (double s : token_sums) token_bias.push_back(std::abs(s) / static_cast<double>(n));
  MapperAudit a;
  a.median_sentence_imbalance = median(sentence_imbalance);
  a.median_token_bias = median(token_bias);
  return a;
}

void criterion_5_and_6() {
  Timer t;
  const MapperAudit a = audit_mapper(500);
  record(5, a.median_sentence_imbalance <= 0.05,
         "green/red balance per held-out sentence median=" + fmt(a.median_sentence_imbalance) +
             " (need <=0.05)",
         t.seconds());
  record(6, a.median_token_bias <= 0.1,
         "per-token assignment bias median=" + fmt(a.median_token_bias) + " (need <=0.1)", 0.0);
}

void criterion_7() {
  Timer t;
  const auto& w = fixture::world();
  const WatermarkParams wp = w.watermark(2.0);
  Rng root(derive_seed(21, "calibration"));
  double sum = 0.0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    Rng prng = root.fork("prompt:" + std::to_string(i));
    const auto prompt = detail::pick_prompt(w.train, 8, prng);
    Rng grng = root.fork("gen:" + std::to_string(i));
    const auto text = generate_plain(w.lm, prompt, wp.sampler, wp.max_tokens, grng);
    sum += detect_watermark(text, w.mm, w.embedder, w.mapper, wp).score;
  }
  const double mean_score = sum / n;
  const double lo = wp.delta * 0.45, hi = wp.delta * 0.55;
  record(7, mean_score >= lo && mean_score <= hi,
         "plain-text score calibration mean=" + fmt(mean_score) + " (need within [" + fmt(lo) +
             "," + fmt(hi) + "])",
         t.seconds());
}

void criterion_8() {
  Timer t;
  const MetricsReport& r = no_attack_run();
  record(8, r.has_green && r.green_among_w >= 0.65,
         "green share among watermarked positions=" + fmt(r.green_among_w) + " (need >=0.65)",
         t.seconds());
}

void criterion_9() {
  Timer t;
  const auto& w = fixture::world();
  bool pass = true;
  std::string detail = "spoof decryption";
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    SpoofRunSpec ours;
    ours.scheme = Scheme::kAdaptive;
    ours.seed = seed;
    ours.wp = w.watermark(kTunedAlpha);
    ours.wp.measure_threshold = 0;  // strengthened attacker: fixed vector regime
    ours.kp = w.kgw(KGWScheme::kFixedKey);
    SpoofRunSpec kgw0 = ours;
    kgw0.scheme = Scheme::kKgw0;
    const double d_ours = run_spoof(ours, w.models(), w.train).result.decryption_rate;
    const double d_kgw0 = run_spoof(kgw0, w.models(), w.train).result.decryption_rate;
    pass = pass && d_ours <= d_kgw0 - 0.10;
    detail += " s" + std::to_string(seed) + ":ours=" + fmt(d_ours) + ",kgw0=" + fmt(d_kgw0);
  }
  const double secs = t.seconds();
  pass = pass && secs <= 300.0;
  record(9, pass, detail + " (need ours<=kgw0-0.10 on every seed, within 300s)", secs);
}

void criterion_10() {
  Timer t;
  const AlphaSweep& s = alpha_sweep();
  const bool ppl_ok = s.ppl_alpha2_median <= s.ppl_alpha0_median;

  const auto& w = fixture::world();
  WatermarkParams wp = w.watermark(2.0);
  wp.delta = 0.0;
  wp.max_tokens = 150;
  bool identical = true;
  Rng root(derive_seed(31, "identity"));
  for (int i = 0; i < 50 && identical; ++i) {
    Rng prng = root.fork("prompt:" + std::to_string(i));
    const auto prompt = detail::pick_prompt(w.train, 8, prng);
    const uint64_t vs = derive_seed(31, "gen:" + std::to_string(i));
    Rng r1(vs), r2(vs);
    const auto plain = generate_plain(w.lm, prompt, wp.sampler, wp.max_tokens, r1);
    const auto traced = generate_watermarked(w.lm, w.mm, w.embedder, w.mapper, prompt, wp, r2);
    identical = plain == traced.tokens;
  }
  record(10, ppl_ok && identical,
         "quality: ppl median alpha2=" + fmt(s.ppl_alpha2_median) +
             " <= alpha0=" + fmt(s.ppl_alpha0_median) + "; zero-strength identity " +
             (identical ? "exact" : "BROKEN") + " (need both)",
         t.seconds());
}

void criterion_11() {
  Timer t;
  // (a) full loss gradient vs central finite differences on the small net
  SentenceEmbedder e(6, 4, 21);
  SemanticMapper m = SemanticMapper::random_init(4, 8, 6, e.seed(), 5);
  RescaleBounds rb;
  rb.lo = 0.0;
  rb.hi = 2.0;
  m.set_bounds(rb);
  LossBatch batch;
  const std::vector<std::vector<TokenId>> sents = {{0, 1, 2}, {3, 4}, {5, 0, 3}, {2, 2, 4}};
  const std::vector<std::vector<TokenId>> twins = {{0, 1}, {3, 5}, {5, 0, 0}, {2, 4}};
  for (const auto& s : sents) batch.u.push_back(e.embed(s));
  for (const auto& s : twins) batch.u_aug.push_back(e.embed(s));
  batch.pairs = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  std::vector<double> grad(m.params().size(), 0.0);
  const LossWeights lw;
  mapper_loss(m, batch, lw, 0.1, &grad);
  double fd_rel = 0.0;
  {
    SemanticMapper probe = m;
    const double h = 1e-5;
    for (size_t p = 0; p < grad.size(); ++p) {
      const double orig = probe.params()[p];
      probe.params()[p] = orig + h;
      const double up = mapper_loss(probe, batch, lw, 0.1, nullptr).total();
      probe.params()[p] = orig - h;
      const double dn = mapper_loss(probe, batch, lw, 0.1, nullptr).total();
      probe.params()[p] = orig;
      const double fd = (up - dn) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[p]), 1e-6});
      fd_rel = std::max(fd_rel, std::abs(fd - grad[p]) / denom);
    }
  }

  // (b) softmax + entropy against an extended-precision reference, relative
  // error per probability component and on the entropy value. Softmax cases
  // use a wide logit scale; entropy cases use a moderate scale, since below
  // roughly 1e-5 nats the double representation of the probabilities alone
  // moves the entropy by more than one part in 1e9 and the comparison stops
  // measuring the implementation.
  double num_rel = 0.0;
  Rng rng(55);
  for (int rep = 0; rep < 400; ++rep) {
    const bool entropy_case = rep >= 200;
    const double scale = entropy_case ? 12.0 : 60.0;
    const size_t n = 2 + rng.uniform_index(199);
    std::vector<double> logits(n);
    for (auto& x : logits) x = (rng.uniform() - 0.5) * scale;
    long double mx = logits[0];
    for (double x : logits) mx = std::max<long double>(mx, x);
    long double z = 0.0;
    for (double x : logits) z += expl(static_cast<long double>(x) - mx);
    const Probs p = softmax(Logits{logits});
    long double href = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const long double pi = expl(static_cast<long double>(logits[i]) - mx) / z;
      if (pi > 0.0L) href -= pi * logl(pi);
      if (!entropy_case) {
        const long double rel =
            fabsl(static_cast<long double>(p.values[i]) - pi) / pi;
        num_rel = std::max(num_rel, static_cast<double>(rel));
      }
    }
    if (entropy_case) {
      const double h = shannon_entropy(p);
      num_rel = std::max(num_rel, static_cast<double>(fabsl(h - href) / href));
    }
  }

  // (c) per-token log-probability decomposition residual
  double residual = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const size_t n = 2 + rng.uniform_index(40);
    Logits l;
    std::vector<uint8_t> vhat(n);
    for (size_t i = 0; i < n; ++i) {
      l.values.push_back(rng.gaussian() * 3.0);
      vhat[i] = rng.uniform() < 0.5 ? 0 : 1;
    }
    const double delta = rng.uniform() * 2.5;
    const Logits lp = awts_perturb(l, vhat, delta);
    const double shift = log_sum_exp(lp.values) - log_sum_exp(l.values);
    const size_t k = rng.uniform_index(n);
    const double lhs = std::log(softmax(lp).values[k]) - std::log(softmax(l).values[k]);
    const double rhs = likelihood_ratio_term(l.values[k], delta, vhat[k]) - shift;
    residual = std::max(residual, std::abs(lhs - rhs));
  }

  const bool pass = fd_rel <= 1e-4 && num_rel <= 1e-9 && residual <= 1e-9;
  record(11, pass,
         "numerical oracles fd_rel=" + fmt(fd_rel, 8) + " softmax_rel=" + fmt(num_rel, 12) +
             " shift_residual=" + fmt(residual, 12) +
             " (need <=1e-4 / <=1e-9 / <=1e-9)",
         t.seconds());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string drop_time_lines(const std::string& text) {
  std::istringstream is(text);
  std::ostringstream kept;
  std::string line;
  while (std::getline(is, line))
    if (line.rfind("time_", 0) != 0) kept << line << "\n";
  return kept.str();
}

void criterion_12() {
  Timer t;
  const std::string dir = fixture::scratch_dir("accept12");
  fixture::write_lines(dir + "/corpus.txt", fixture::synth_lines(500, 23));
  write_text_file(dir + "/opening.txt", fixture::opening_sentence() + "\n");
  std::ostringstream cfg;
  cfg << "seed 11\n[corpus]\npath " << dir << "/corpus.txt\ntokenizer word\n";
  cfg << "[paths]\nvocab " << dir << "/vocab.txt\nlm " << dir << "/lm.awm\nmm " << dir
      << "/mm.awm\neval " << dir << "/eval.awm\nmapper " << dir << "/mapper.awm\n";
  cfg << "[lm]\nk 0.01\n";
  cfg << "[embedder]\ndim 16\n";
  cfg << "[mapper]\nepochs 2\nhidden 16\npair_samples 64\ncalibration_pairs 100\n";
  cfg << "[watermark]\nalpha 2.0\ndelta 1.5\nmeasure_threshold 30\nmax_tokens 100\n";
  cfg << "opening_file " << dir << "/opening.txt\n";
  cfg << "[experiment]\nsamples_per_class 30\ntext_len 100\ntext_len_jitter 10\nprompt_len 6\n";
  auto cli = [&](std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back(dir + "/config.cfg");
    return run_cli(args);
  };
  write_text_file(dir + "/config.cfg", cfg.str());

  bool pass = true;
  pass = pass && cli({"train-lm", "--role", "generator", "--out", dir + "/lm.awm"}) == 0;
  pass = pass && cli({"train-lm", "--role", "measurement", "--out", dir + "/mm.awm"}) == 0;
  pass = pass && cli({"train-lm", "--role", "evaluator", "--out", dir + "/eval.awm"}) == 0;
  pass = pass && cli({"train-mapper", "--out", dir + "/mapper.awm"}) == 0;
  pass = pass && cli({"evaluate", "--out", dir + "/m1.txt"}) == 0;
  pass = pass && cli({"evaluate", "--out", dir + "/m2.txt"}) == 0;
  pass = pass && cli({"generate", "--n", "5", "--out", dir + "/wm.txt"}) == 0;
  pass = pass && cli({"detect", "--in", dir + "/wm.txt", "--out", dir + "/d1.txt"}) == 0;
  pass = pass && cli({"detect", "--in", dir + "/wm.txt", "--out", dir + "/d2.txt"}) == 0;

  const bool reports_equal =
      drop_time_lines(slurp(dir + "/m1.txt")) == drop_time_lines(slurp(dir + "/m2.txt"));
  const bool csv_equal = slurp(dir + "/m1.txt.samples.csv") == slurp(dir + "/m2.txt.samples.csv") &&
                         slurp(dir + "/m1.txt.roc.csv") == slurp(dir + "/m2.txt.roc.csv");
  const bool detect_equal = slurp(dir + "/d1.txt") == slurp(dir + "/d2.txt") &&
                            !slurp(dir + "/d1.txt").empty();
  pass = pass && reports_equal && csv_equal && detect_equal;
  record(12, pass,
         std::string("repeat-run determinism: metrics ") + (reports_equal ? "equal" : "DIFFER") +
             ", csv " + (csv_equal ? "equal" : "DIFFER") + ", detection " +
             (detect_equal ? "equal" : "DIFFER") + " (timing lines excluded)",
         t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  std::optional<int> only;
  if (argc > 1) only = std::atoi(argv[1]);
  auto want = [&](int id) { return !only || *only == id; };

  Timer setup;
  fixture::world();
  std::cout << "setup: corpus + models ready [" << std::fixed << std::setprecision(1)
            << setup.seconds() << "s]\n";

  if (want(1)) criterion_1();
  if (want(2)) criterion_2();
  if (want(3)) criterion_3();
  if (want(4)) criterion_4();
  if (want(5) || want(6)) criterion_5_and_6();
  if (want(7)) criterion_7();
  if (want(8)) criterion_8();
  if (want(9)) criterion_9();
  if (want(10)) criterion_10();
  if (want(11)) criterion_11();
  if (want(12)) criterion_12();

  size_t passed = 0;
  for (const auto& r : g_results) passed += r.pass;
  std::cout << "acceptance: " << passed << "/" << g_results.size() << " criteria passed\n";
  return passed == g_results.size() ? 0 : 1;
}
