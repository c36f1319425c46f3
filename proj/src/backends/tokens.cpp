#include "adec/backends/tokens.hpp"

#include <cctype>

namespace adec::backends {

long long TokenCounter::count(std::string_view text) const {
  if (mode_ == Mode::bytes_div4) return static_cast<long long>((text.size() + 3) / 4);
  long long n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace adec::backends
