#pragma once

// Shared synthetic-corpus world for tests: a template grammar over a fixed
// word bank, sampled with Zipf-like weights so token frequencies spread the
// way natural text does. Collocations (preposition -> article, first name ->
// surname, number -> measure noun) are nearly forced with one rare variant,
// while open slots (nouns, verbs, adjectives) stay wide. The measurement
// model therefore sees two clearly separated entropy regimes, which is what
// an entropy gate needs to have visible work to do.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "awm/awm.hpp"

namespace fixture {

using awm::Corpus;
using awm::NGramModel;
using awm::Rng;
using awm::SemanticMapper;
using awm::SentenceEmbedder;
using awm::TokenizerMode;
using awm::Vocabulary;

inline const std::vector<std::string>& determiners() {
  static const std::vector<std::string> v = {"the", "a", "one", "this", "that",
                                             "each", "some", "another"};
  return v;
}

// "of" is reserved for the genitive collocation below and "toward" for place
// names, so a preposition from this bank is always followed by an article.
inline const std::vector<std::string>& prepositions() {
  static const std::vector<std::string> v = {"in",   "on",   "at",      "with", "over", "under",
                                             "through", "near", "past", "along", "across"};
  return v;
}

inline const std::vector<std::string>& adverbs() {
  static const std::vector<std::string> v = {
      "quietly", "slowly",  "often",   "early",    "late",    "again",   "alone",
      "together", "briefly", "gently",  "suddenly", "rarely",  "calmly",  "twice",
      "forever", "nearby",  "upstream", "downhill", "inside",  "outside", "somewhere",
      "everywhere", "yesterday", "today"};
  return v;
}

inline const std::vector<std::string>& noun_stems() {
  static const std::vector<std::string> v = {
      "river",  "boat",   "mill",    "road",   "field",  "stone",  "bridge", "house",
      "garden", "market", "lantern", "letter", "window", "door",   "bell",   "wagon",
      "barn",   "forest", "path",    "hill",   "valley", "harbor", "tower",  "cellar",
      "orchard", "fence",  "well",    "hedge",  "meadow", "brook",  "corner", "roof",
      "chimney", "stable", "cart",    "basket", "loaf",   "candle", "cloak",  "map",
      "coin",   "song",   "story",   "winter", "summer", "storm",  "rain",   "wind",
      "snow",   "fire",   "smoke",   "shadow", "morning", "evening", "night",  "village",
      "farmer", "miller", "weaver",  "baker",  "sailor", "teacher", "child",  "neighbor",
      "horse",  "dog",    "cat",     "sheep",  "crow",   "fox"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {
      "carried", "crossed",  "watched", "opened",  "closed",  "followed", "found",
      "lost",    "built",    "mended",  "painted", "counted", "gathered", "planted",
      "harvested", "traded",  "borrowed", "returned", "lit",     "doused",   "climbed",
      "descended", "circled", "entered", "left",    "reached", "passed",   "guarded",
      "cleaned", "filled",   "emptied", "moved",   "shook",   "held",     "dropped",
      "raised",  "lowered",  "pulled",  "pushed",  "tied",    "untied",   "wrote",
      "read",    "sang",     "told",    "heard",   "saw",     "remembered", "forgot",
      "visited", "greeted",  "warned",  "thanked", "helped",  "taught",   "fed",
      "chased",  "startled", "calmed",  "repaired"};
  return v;
}

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {
      "old",    "quiet",  "narrow", "wide",   "small",  "tall",   "low",     "long",
      "short",  "dark",   "bright", "cold",   "warm",   "dry",    "wet",     "dusty",
      "muddy",  "golden", "gray",   "green",  "red",    "white",  "black",   "blue",
      "heavy",  "light",  "empty",  "full",   "broken", "mended", "crooked", "straight",
      "distant", "near",   "early",  "late",   "first",  "last",   "hidden",  "open",
      "steep",  "gentle", "sturdy", "fragile", "ancient", "new",    "worn",    "polished",
      "frozen", "thawed", "silent", "loud",   "pale",   "vivid",  "plain",   "ornate",
      "lonely", "busy",   "idle",   "patient"};
  return v;
}

inline const std::vector<std::string>& first_names() {
  static const std::vector<std::string> v = {
      "anna",  "marta", "elsa",  "ivo",   "tomas", "petra", "jonas", "mira",
      "oskar", "lena",  "karel", "sofie", "emil",  "nora",  "viktor", "ida",
      "rasmus", "greta", "anton", "clara", "felix", "maja",  "hugo",  "alma",
      "teodor", "livia", "bruno", "stella", "edgar", "rosa"};
  return v;
}

inline const std::vector<std::string>& surnames() {
  static const std::vector<std::string> v = {
      "reyes",   "lindgren", "fischer", "moreau",  "kovacs", "yamada",  "ried",
      "bergman", "castell",  "duarte",  "eriksen", "falk",   "garcia",  "holm",
      "ibsen",   "jansen",   "keller",  "larsen",  "molnar", "novak",   "olsen",
      "petrov",  "quist",    "ruiz",    "sand",    "toth",   "ulven",   "vang",
      "weber",   "zeman"};
  return v;
}

inline const std::vector<std::string>& number_words() {
  static const std::vector<std::string> v = {
      "two",    "three",  "four",   "five",    "six",     "seven",  "eight",
      "nine",   "ten",    "eleven", "twelve",  "twenty",  "thirty", "forty",
      "fifty",  "sixty",  "seventy", "eighty", "ninety",  "dozen",  "several",
      "many",   "few",    "countless", "numerous", "assorted", "paired", "scattered"};
  return v;
}

// Compound place names and landmark nouns pad the vocabulary toward the
// hundreds without bloating the hand-written banks.
inline const std::vector<std::string>& place_names() {
  static std::vector<std::string> v = [] {
    const std::vector<std::string> dirs = {"north", "south", "east",  "west",
                                           "upper", "lower", "older", "outer"};
    const std::vector<std::string> feats = {"field",  "brook", "wood",  "gate",  "ford",
                                            "bridge", "stead", "haven", "cliff", "marsh",
                                            "glen",   "ridge", "hollow", "fall",  "shore",
                                            "crest",  "mead",  "burrow"};
    std::vector<std::string> out;
    for (const auto& d : dirs)
      for (const auto& f : feats) out.push_back(d + f);
    return out;
  }();
  return v;
}

inline const std::vector<std::string>& compound_nouns() {
  static std::vector<std::string> v = [] {
    const std::vector<std::string> a = {"river", "stone", "rain", "wind",  "corn",  "hay",
                                        "milk",  "wool",  "iron", "copper", "cedar", "birch"};
    const std::vector<std::string> b = {"bank",  "yard",  "shed",  "press", "mill", "cart",
                                        "house", "stack", "gate",  "pile",  "barrel", "loft"};
    std::vector<std::string> out;
    for (const auto& x : a)
      for (const auto& y : b) out.push_back(x + y);
    return out;
  }();
  return v;
}

inline const std::vector<std::string>& plural_nouns() {
  static std::vector<std::string> v = [] {
    std::vector<std::string> out;
    for (const auto& n : noun_stems()) out.push_back(n + "s");
    return out;
  }();
  return v;
}

// Zipf-ish draw: weight 1/(rank+1), so early bank entries dominate the way
// frequent words do in real text while the tail stays alive.
inline size_t zipf_pick(Rng& rng, size_t n) {
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) total += 1.0 / static_cast<double>(i + 1);
  double u = rng.uniform() * total;
  for (size_t i = 0; i < n; ++i) {
    u -= 1.0 / static_cast<double>(i + 1);
    if (u <= 0.0) return i;
  }
  return n - 1;
}

inline const std::string& zipf_word(Rng& rng, const std::vector<std::string>& bank) {
  return bank[zipf_pick(rng, bank.size())];
}

// Collocation draw: a fixed main choice, one rare variant, a trace of anything
// else. Articles after prepositions, surnames after first names and measure
// nouns after numbers all behave this way in real prose: the context almost
// forces the next word, yet one plausible alternative stays live.
inline const std::string& collocate(Rng& rng, const std::vector<std::string>& bank,
                                    size_t main_idx, size_t alt_idx) {
  const double u = rng.uniform();
  if (u < 0.95) return bank[main_idx % bank.size()];
  if (u < 0.99) return bank[alt_idx % bank.size()];
  return bank[rng.uniform_index(bank.size())];
}

// Articles in object position: "the" dominates, "a" is the live variant.
inline const std::string& object_determiner(Rng& rng) {
  return collocate(rng, determiners(), 0, 1);
}

inline void append_noun_head(std::vector<std::string>& out, Rng& rng) {
  if (rng.uniform() < 0.45) out.push_back(zipf_word(rng, adjectives()));
  const double kind = rng.uniform();
  if (kind < 0.55)
    out.push_back(zipf_word(rng, noun_stems()));
  else if (kind < 0.75)
    out.push_back(zipf_word(rng, plural_nouns()));
  else
    out.push_back(zipf_word(rng, compound_nouns()));
}

// Subject phrases open with a varied determiner; object and prepositional
// phrases open with the near-forced article. The genitive tail repeats the
// same pattern after "of".
inline void append_noun_phrase(std::vector<std::string>& out, Rng& rng, bool subject) {
  if (subject)
    out.push_back(zipf_word(rng, determiners()));
  else
    out.push_back(object_determiner(rng));
  append_noun_head(out, rng);
  if (rng.uniform() < 0.5) {
    out.push_back("of");
    out.push_back(object_determiner(rng));
    out.push_back(zipf_word(rng, rng.uniform() < 0.7 ? noun_stems() : plural_nouns()));
  }
}

// Direct objects drop the article for a bare plural about a third of the
// time, which keeps the post-verb continuation genuinely open.
inline void append_object(std::vector<std::string>& out, Rng& rng) {
  if (rng.uniform() < 0.3) {
    out.push_back(zipf_word(rng, plural_nouns()));
    return;
  }
  append_noun_phrase(out, rng, false);
}

inline void append_sentence(std::vector<std::string>& out, Rng& rng) {
  const double form = rng.uniform();
  if (form < 0.30) {
    append_noun_phrase(out, rng, true);
    out.push_back(zipf_word(rng, verbs()));
    append_object(out, rng);
  } else if (form < 0.55) {
    append_noun_phrase(out, rng, true);
    out.push_back(zipf_word(rng, verbs()));
    out.push_back(zipf_word(rng, prepositions()));
    append_noun_phrase(out, rng, false);
  } else if (form < 0.72) {
    const size_t who = zipf_pick(rng, first_names().size());
    out.push_back(first_names()[who]);
    out.push_back(collocate(rng, surnames(), who, who + 7));
    out.push_back(zipf_word(rng, verbs()));
    if (rng.uniform() < 0.5) {
      append_object(out, rng);
    } else {
      out.push_back("toward");
      out.push_back(zipf_word(rng, place_names()));
    }
  } else if (form < 0.88) {
    const size_t count = zipf_pick(rng, number_words().size());
    out.push_back(number_words()[count]);
    out.push_back(collocate(rng, plural_nouns(), count * 5 + 3, count * 5 + 11));
    out.push_back(zipf_word(rng, verbs()));
    out.push_back(zipf_word(rng, prepositions()));
    append_noun_phrase(out, rng, false);
  } else {
    append_noun_phrase(out, rng, true);
    out.push_back(zipf_word(rng, verbs()));
    out.push_back(zipf_word(rng, adverbs()));
    if (rng.uniform() < 0.4) {
      out.push_back("and");
      out.push_back(zipf_word(rng, verbs()));
      append_object(out, rng);
    }
  }
  out.push_back(".");
}

inline std::string synth_line(Rng& rng) {
  std::vector<std::string> words;
  const size_t sentences = 2 + rng.uniform_index(3);
  for (size_t s = 0; s < sentences; ++s) append_sentence(words, rng);
  std::string line;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) line += ' ';
    line += words[i];
  }
  return line;
}

inline std::vector<std::string> synth_lines(size_t n, uint64_t seed) {
  Rng rng(awm::derive_seed(seed, "synth-corpus"));
  std::vector<std::string> lines;
  lines.reserve(n);
  for (size_t i = 0; i < n; ++i) lines.push_back(synth_line(rng));
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ostringstream os;
  for (const auto& l : lines) os << l << "\n";
  awm::write_text_file(path, os.str());
}

inline const std::string& opening_sentence() {
  static const std::string s =
      "the quiet river carried one old boat past the mill and the miller watched .";
  return s;
}

/// Fully trained desk-scale stack shared by the heavier tests. Built once.
struct World {
  Vocabulary vocab;
  TokenizerMode mode = TokenizerMode::kWhitespace;
  Corpus train;
  Corpus holdout;
  NGramModel lm;
  NGramModel mm;
  NGramModel evaluator;
  SentenceEmbedder embedder;
  SemanticMapper mapper;
  std::vector<awm::TokenId> opening;

  awm::WatermarkParams watermark(double alpha = 2.0) const {
    awm::WatermarkParams wp;
    wp.alpha = alpha;
    wp.delta = 1.5;
    wp.measure_threshold = 50;
    wp.opening = opening;
    wp.sampler.top_k = 50;
    wp.sampler.top_p = 0.9;
    wp.max_tokens = 200;
    return wp;
  }

  awm::KGWParams kgw(awm::KGWScheme scheme) const {
    awm::KGWParams kp;
    kp.gamma = 0.5;
    kp.delta_add = 2.0;
    kp.scheme = scheme;
    kp.key = awm::derive_seed(11, "kgw-key");
    return kp;
  }

  awm::ModelSet models() const {
    awm::ModelSet m;
    m.lm = &lm;
    m.mm = &mm;
    m.evaluator = &evaluator;
    m.embedder = &embedder;
    m.mapper = &mapper;
    m.prompts = &train;
    return m;
  }
};

inline World build_world(size_t lines_n, uint64_t corpus_seed, size_t mapper_epochs,
                         size_t mapper_hidden) {
  const auto lines = synth_lines(lines_n, corpus_seed);
  const TokenizerMode mode = TokenizerMode::kWhitespace;
  Vocabulary vocab = awm::build_vocabulary(lines, awm::VocabBuildOptions{mode, 5000});
  const auto [train_lines, holdout_lines] = awm::split_lines(lines, 5);

  World w{std::move(vocab),
          mode,
          Corpus{},
          Corpus{},
          NGramModel(2, 1, 0.5),
          NGramModel(2, 1, 0.5),
          NGramModel(2, 1, 0.5),
          SentenceEmbedder(2, 1, 0),
          SemanticMapper(1, 1, 1, 0),
          {}};
  w.train = awm::make_corpus(w.vocab, train_lines, mode);
  w.holdout = awm::make_corpus(w.vocab, holdout_lines, mode);
  w.lm = NGramModel::train(w.train, w.vocab, 3, 0.01);
  w.mm = NGramModel::train(w.train, w.vocab, 2, 0.005);
  // Order-4 evaluator with light smoothing: held-out text keeps its long
  // contexts familiar, while text that collapses onto a narrow token set
  // pays the unseen-context penalty at almost every step.
  w.evaluator = NGramModel::train(w.holdout, w.vocab, 4, 0.02);
  w.embedder = SentenceEmbedder(w.vocab.size(), 24, awm::derive_seed(11, "embedder"));

  awm::TrainConfig cfg;
  cfg.batch = 128;
  cfg.epochs = mapper_epochs;
  cfg.hidden = mapper_hidden;
  cfg.pair_samples = 256;
  cfg.calibration_pairs = 600;
  // Sign temperature well below the typical output magnitude: the balance
  // terms then see every coordinate's sign, not just the large ones, which
  // is what the hard-sign audits measure.
  cfg.tau = 0.02;
  cfg.weights.token_bias = 3.0;
  cfg.weights.contrastive = 2.0;
  cfg.seed = 7;
  w.mapper = awm::train_mapper(w.train, w.embedder, cfg, nullptr);

  w.opening = awm::tokenize(w.vocab, opening_sentence(), mode);
  return w;
}

/// The default world: ~2600 docs, 520 held out, word-level vocabulary in the
/// several-hundreds.
inline const World& world() {
  static const World w = build_world(2600, 99, 100, 64);
  return w;
}

/// Unique scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  static uint64_t counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("awm-" + tag + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter++));
  fs::create_directories(p);
  return p.string();
}

}  // namespace fixture
