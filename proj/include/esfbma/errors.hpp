#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace esfbma {

// Error taxonomy mirrored by the CLI exit codes:
//   ValidationError -> 2, NumericalError -> 3, IslandError -> 4.

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a weight matrix still contains neighborless units at
// row-standardization time. Carries the offending unit ids so callers can
// suggest a patch file.
class IslandError : public std::runtime_error {
 public:
  IslandError(const std::string& msg, std::vector<std::string> islands)
      : std::runtime_error(msg), islands_(std::move(islands)) {}

  const std::vector<std::string>& islands() const { return islands_; }

 private:
  std::vector<std::string> islands_;
};

}  // namespace esfbma
