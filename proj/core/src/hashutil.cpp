#include "persuade/hashutil.hpp"

#include <cstdio>

namespace persuade {

HashSeq& HashSeq::add(std::string_view part) {
  state_ = fnv1a64(part, fnv1a64("s", state_));
  add(static_cast<std::uint64_t>(part.size()));
  return *this;
}

HashSeq& HashSeq::add(std::uint64_t value) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  state_ = fnv1a64(std::string_view(bytes, 8), state_);
  return *this;
}

HashSeq& HashSeq::add(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return add(std::string_view(buf));
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

}  // namespace persuade
