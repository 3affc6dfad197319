#pragma once

#include <stdexcept>
#include <string>

namespace awm {

// File/corpus problems: missing paths, unreadable or malformed artifacts.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Artifacts that do not belong together (vocabulary hash or dimension clash).
class MismatchError : public std::runtime_error {
 public:
  explicit MismatchError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace awm
