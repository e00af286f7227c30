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
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace iwr {

/// 64-bit FNV-1a. Used for content ids and configuration fingerprints, where
/// the value must be stable across runs and platforms.
class Fnv1a {
 public:
  Fnv1a& update(std::span<const std::uint8_t> bytes);
  Fnv1a& update(std::string_view text);
  Fnv1a& update_u64(std::uint64_t value);
  Fnv1a& update_f64(double value);

  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

}  // namespace iwr
