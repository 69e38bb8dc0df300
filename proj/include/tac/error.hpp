#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tac {

// All contract violations surface as Error. `code` is a short stable
// kebab-case identifier (e.g. "degenerate-class") suitable for matching in
// tests and CLI diagnostics; `what()` is "<code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace tac
