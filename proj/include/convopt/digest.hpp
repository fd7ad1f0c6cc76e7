#pragma once

// 64-bit FNV-1a content digests for reproducibility records.

#include "convopt/mesh.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace convopt {

class Digest {
 public:
  Digest& bytes(const void* data, std::size_t size);
  Digest& text(std::string_view s);
  Digest& integer(std::int64_t v);
  /// Bit pattern of the double, with -0.0 folded onto 0.0.
  Digest& real(double v);
  Digest& field(const ScalarField& v);

  std::uint64_t value() const { return state_; }
  /// 16 lowercase hex digits.
  std::string hex() const;

 private:
  std::uint64_t state_ = 14695981039346656037ull;
};

std::string digest_hex(std::string_view text);

}  // namespace convopt
