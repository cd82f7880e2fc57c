#pragma once

#include <stdexcept>
#include <string>

namespace hlstm {

// Every failure carries a short machine-readable category so the CLI can
// report `error[<category>]: <message>` on one line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct BlowupError : Error {
  BlowupError(const std::string& what, long step) : Error("blowup", what), step(step) {}
  long step;
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error("divergence", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace hlstm
