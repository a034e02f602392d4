#pragma once

#include <stdexcept>
#include <string>

namespace affex {

// Raised when a caller breaks an operation's documented precondition.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

class SceneGenerationError : public std::runtime_error {
 public:
  SceneGenerationError(const std::string& category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A required input file or checkpoint does not exist.
class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

// An output location exists and overwriting it was not requested.
class RefusedOverwrite : public std::runtime_error {
 public:
  explicit RefusedOverwrite(const std::string& what) : std::runtime_error(what) {}
};

#define AFFEX_REQUIRE(cond, msg)                   \
  do {                                             \
    if (!(cond)) throw ::affex::ContractViolation(msg); \
  } while (0)

}  // namespace affex
