#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "awm/errors.hpp"
#include "awm/vocab.hpp"

namespace awm {

enum class TokenizerMode { kChar, kWhitespace };

// Unknown-token surfaces. The char-mode surface is a single byte (0x7f) so
// generated ids always detokenize/retokenize losslessly.
inline constexpr std::string_view kCharUnkSurface = "\x7f";
inline constexpr std::string_view kWordUnkSurface = "<unk>";

inline std::string_view unk_surface(TokenizerMode mode) {
  return mode == TokenizerMode::kChar ? kCharUnkSurface : kWordUnkSurface;
}

inline TokenizerMode tokenizer_mode_from_string(std::string_view s) {
  if (s == "char") return TokenizerMode::kChar;
  if (s == "word" || s == "whitespace") return TokenizerMode::kWhitespace;
  throw IoError("unknown tokenizer mode: " + std::string(s));
}

inline std::vector<std::string> split_surfaces(std::string_view text, TokenizerMode mode) {
  std::vector<std::string> out;
  if (mode == TokenizerMode::kChar) {
    out.reserve(text.size());
    for (char c : text) out.emplace_back(1, c);
  } else {
    size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j > i) out.emplace_back(text.substr(i, j - i));
      i = j;
    }
  }
  return out;
}

struct VocabBuildOptions {
  TokenizerMode mode = TokenizerMode::kChar;
  size_t max_size = 5000;  // includes the reserved unknown token
};

/// Frequency-ordered vocabulary over corpus lines, capped at max_size-1
/// surfaces plus the reserved unknown token (appended last). Ties broken by
/// surface so the result is deterministic for a given corpus.
inline Vocabulary build_vocabulary(const std::vector<std::string>& lines,
                                   const VocabBuildOptions& opts) {
  if (lines.empty()) throw IoError("cannot build vocabulary from empty corpus");
  std::map<std::string, uint64_t> counts;
  const std::string unk(unk_surface(opts.mode));
  for (const auto& line : lines)
    for (auto& s : split_surfaces(line, opts.mode))
      if (s != unk) ++counts[std::move(s)];
  if (counts.empty()) throw IoError("corpus contains no tokens");

  std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (opts.max_size < 2) throw IoError("vocabulary cap must be at least 2");
  if (ranked.size() > opts.max_size - 1) ranked.resize(opts.max_size - 1);

  std::vector<std::string> tokens;
  tokens.reserve(ranked.size() + 1);
  for (auto& [surface, _] : ranked) tokens.push_back(std::move(surface));
  tokens.push_back(unk);
  return Vocabulary::from_tokens(std::move(tokens));
}

inline TokenId unk_id(const Vocabulary& vocab, TokenizerMode mode) {
  auto id = vocab.find(unk_surface(mode));
  if (!id) throw MismatchError("vocabulary has no unknown token for this mode");
  return *id;
}

inline std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text,
                                     TokenizerMode mode) {
  const TokenId unk = unk_id(vocab, mode);
  std::vector<TokenId> ids;
  for (const auto& s : split_surfaces(text, mode)) {
    auto id = vocab.find(s);
    ids.push_back(id ? *id : unk);
  }
  return ids;
}

inline std::string detokenize(const Vocabulary& vocab, std::span<const TokenId> ids,
                              TokenizerMode mode) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (mode == TokenizerMode::kWhitespace && i > 0) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

/// Tokenized documents, one per corpus line. All ids are in-vocabulary
/// (out-of-vocabulary surfaces map to the unknown token).
struct Corpus {
  std::vector<std::vector<TokenId>> docs;
  TokenizerMode mode = TokenizerMode::kChar;

  size_t total_tokens() const {
    size_t n = 0;
    for (const auto& d : docs) n += d.size();
    return n;
  }
};

inline Corpus make_corpus(const Vocabulary& vocab, const std::vector<std::string>& lines,
                          TokenizerMode mode) {
  Corpus c;
  c.mode = mode;
  for (const auto& line : lines) {
    auto ids = tokenize(vocab, line, mode);
    if (!ids.empty()) c.docs.push_back(std::move(ids));
  }
  if (c.docs.empty()) throw IoError("corpus contains no non-empty documents");
  return c;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Deterministic train/holdout split by line index: every `holdout_every`-th
// line goes to the holdout side (used to fit the evaluation model).
inline std::pair<std::vector<std::string>, std::vector<std::string>> split_lines(
    const std::vector<std::string>& lines, size_t holdout_every) {
  std::vector<std::string> train, holdout;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (holdout_every > 0 && (i + 1) % holdout_every == 0)
      holdout.push_back(lines[i]);
    else
      train.push_back(lines[i]);
  }
  return {train, holdout};
}

}  // namespace awm
