// Copyright 2026 The hessl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HESSL_RNG_HPP
#define HESSL_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace hessl {

/// Counter-based generator. A stream is a 64-bit key; the n-th draw is a pure
/// function of (key, n), so any draw can be reproduced without replaying the
/// draws before it and results do not depend on how work is scheduled.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Child stream keyed by this stream's key and the given path. Does not
  /// advance this stream.
  Stream child(std::initializer_list<std::uint64_t> path) const noexcept;

  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Beta(a, b) via two gamma draws.
  double beta(double a, double b);

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Root stream for a user seed and a path of sub-stream identifiers.
Stream make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

}  // namespace hessl

#endif  // HESSL_RNG_HPP
