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

#ifndef HESSL_TOOLS_RUN_MANIFEST_HPP
#define HESSL_TOOLS_RUN_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace hessl::cli {

/// Provenance record written beside every command's primary output.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;  // path -> sha256
  std::vector<std::string> artifacts;

  void add_input(const std::string& path);
  std::string to_json() const;
};

}  // namespace hessl::cli

#endif  // HESSL_TOOLS_RUN_MANIFEST_HPP
