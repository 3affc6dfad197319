#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "awm/errors.hpp"
#include "awm/rng.hpp"

namespace awm {

using TokenId = uint32_t;

/// Immutable dense token table: index <-> surface bijection, indices 0..size-1.
class Vocabulary {
 public:
  static Vocabulary from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2) throw IoError("vocabulary needs at least 2 tokens");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.index_.reserve(v.tokens_.size());
    for (size_t i = 0; i < v.tokens_.size(); ++i) {
      if (v.tokens_[i].empty()) throw IoError("vocabulary token may not be empty");
      auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i));
      if (!inserted) throw IoError("duplicate vocabulary token: " + v.tokens_[i]);
    }
    uint64_t h = kFnvOffsetBasis;
    for (const auto& t : v.tokens_) {
      h = fnv1a64(t, h);
      h = fnv1a64("\n", h);
    }
    v.hash_ = h;
    return v;
  }

  size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  std::optional<TokenId> find(std::string_view surface) const {
    auto it = index_.find(std::string(surface));
    return it == index_.end() ? std::nullopt : std::optional<TokenId>(it->second);
  }

  /// FNV-1a over all surfaces; artifacts trained against this vocabulary
  /// carry the hash so mismatched files are refused up front.
  uint64_t hash() const { return hash_; }

  bool contains_ids(std::span<const TokenId> ids) const {
    for (TokenId id : ids)
      if (id >= tokens_.size()) return false;
    return true;
  }

  // One token surface per line, index = line number.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
  }

 private:
  Vocabulary() = default;

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  uint64_t hash_ = 0;
};

}  // namespace awm
