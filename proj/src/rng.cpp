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

#include "hessl/rng.hpp"

#include <random>

namespace hessl {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Stream::result_type Stream::operator()() noexcept {
  const std::uint64_t n = counter_++;
  return mix64(mix64(key_ ^ (n * 0xD1B54A32D192ED03ull)) + n);
}

Stream Stream::child(std::initializer_list<std::uint64_t> path) const noexcept {
  std::uint64_t k = mix64(key_ ^ 0x6A09E667F3BCC908ull);
  for (std::uint64_t p : path) k = mix64(k ^ mix64(p + 0x3C6EF372FE94F82Bull));
  return Stream(k, 0);
}

double Stream::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t Stream::below(std::uint64_t n) noexcept {
  // Lemire-style rejection keeps the result unbiased.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

double Stream::beta(double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(*this);
  const double y = gb(*this);
  return x / (x + y);
}

Stream make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  return Stream(mix64(seed), 0).child(path);
}

}  // namespace hessl
