#pragma once

#include <string_view>

namespace adec::backends {

// Deterministic stand-in for a tokenizer.
class TokenCounter {
 public:
  enum class Mode { bytes_div4, whitespace };

  TokenCounter() = default;
  explicit TokenCounter(Mode mode) : mode_(mode) {}

  long long count(std::string_view text) const;
  Mode mode() const { return mode_; }

 private:
  Mode mode_ = Mode::bytes_div4;
};

}  // namespace adec::backends
