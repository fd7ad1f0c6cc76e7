#include "convopt/digest.hpp"

#include <cstdio>
#include <cstring>

namespace convopt {

Digest& Digest::bytes(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 1099511628211ull;
  }
  return *this;
}

Digest& Digest::text(std::string_view s) {
  integer(static_cast<std::int64_t>(s.size()));
  return bytes(s.data(), s.size());
}

Digest& Digest::integer(std::int64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffu);
  return bytes(buf, 8);
}

Digest& Digest::real(double v) {
  if (v == 0.0) v = 0.0;
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return integer(static_cast<std::int64_t>(bits));
}

Digest& Digest::field(const ScalarField& v) {
  integer(v.size());
  for (double x : v) real(x);
  return *this;
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

std::string digest_hex(std::string_view text) { return Digest().bytes(text.data(), text.size()).hex(); }

}  // namespace convopt
