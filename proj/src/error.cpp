#include "cnorm/error.hpp"

namespace cnorm {

Error::Error(std::string code, const std::string& detail)
    : std::runtime_error(detail.empty() ? code : code + ": " + detail),
      code_(std::move(code)) {}

}  // namespace cnorm
