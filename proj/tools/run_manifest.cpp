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

#include "run_manifest.hpp"

#include "hessl/image_io.hpp"
#include "hessl/version.hpp"

namespace hessl::cli {

void RunManifest::add_input(const std::string& path) { input_hashes[path] = io::sha256_file(path); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["arguments"] = arguments;
  j["config"] = config;
  j["seeds"] = seeds;
  j["inputs"] = input_hashes;
  j["artifacts"] = artifacts;
  j["tool_version"] = kVersion;
  return j.dump(2) + "\n";
}

}  // namespace hessl::cli
