// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#include "iwr/hash.hpp"

#include <bit>
#include <cstdio>

namespace iwr {

namespace {
constexpr std::uint64_t kPrime = 0x100000001b3ULL;
}

Fnv1a& Fnv1a::update(std::span<const std::uint8_t> bytes) {
  for (std::uint8_t b : bytes) {
    state_ ^= b;
    state_ *= kPrime;
  }
  return *this;
}

Fnv1a& Fnv1a::update(std::string_view text) {
  // Length prefix keeps ("ab","c") and ("a","bc") apart.
  update_u64(text.size());
  for (char c : text) {
    state_ ^= static_cast<std::uint8_t>(c);
    state_ *= kPrime;
  }
  return *this;
}

Fnv1a& Fnv1a::update_u64(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= static_cast<std::uint8_t>(value >> (8 * i));
    state_ *= kPrime;
  }
  return *this;
}

Fnv1a& Fnv1a::update_f64(double value) { return update_u64(std::bit_cast<std::uint64_t>(value)); }

std::string Fnv1a::hex() const { return to_hex(state_); }

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace iwr
