#pragma once

#include <stdexcept>
#include <string>

namespace cnorm {

/// Exception carrying a stable machine-readable code ("needs_third_pass",
/// "zero_norm", ...) alongside a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail);

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace cnorm
