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

#ifndef HESSL_TOOLS_COMMANDS_HPP
#define HESSL_TOOLS_COMMANDS_HPP

namespace hessl::cli {

/// Parses arguments, runs one subcommand and returns the process exit code.
int run(int argc, char** argv);

}  // namespace hessl::cli

#endif  // HESSL_TOOLS_COMMANDS_HPP
