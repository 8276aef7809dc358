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

#ifndef HESSL_CONFIG_HPP
#define HESSL_CONFIG_HPP

#include <cstdint>
#include <string>

#include "hessl/augment.hpp"
#include "hessl/datapipe.hpp"
#include "hessl/dual_encoder.hpp"
#include "hessl/ssl_losses.hpp"
#include "hessl/stain_model.hpp"

namespace hessl::config {

struct TrainConfig {
  ssl::SslHyperParams ssl;
  augment::AugmentPolicy augment;
  datapipe::BatchComposition batch;
  nn::RmsPropConfig optimizer;
  nn::EncoderSpec encoder;
  stain_model::StainParams stain;
  std::string manifest;  // dataset manifest, relative to the config file

  int iterations_per_epoch = 1000;
  int patience_epochs = 100;
  int max_epochs = 500;
  std::uint64_t seed = 0;
  bool deterministic = true;
  /// K augmentations per labeled sample instead of one.
  bool labeled_k_augment = false;
  /// Linear warm-up of the unlabeled weight: lambda_u is scaled by
  /// min(1, iteration / N). 0 applies the full weight from the first step.
  int unlabeled_rampup_iterations = 0;
  int workers = 1;
  /// Also checkpoint every N iterations inside an epoch; 0 disables.
  int checkpoint_every = 0;
  int eval_batch = 64;

  void validate() const;
};

/// Parses the TOML subset used for training configs: top-level keys,
/// [section] headers, and values that are numbers, booleans, quoted strings
/// or single-line numeric arrays. Unknown keys raise kConfiguration.
TrainConfig parse_config(const std::string& text);

/// Canonical TOML rendering; parse_config(to_toml(c)) reproduces c.
std::string to_toml(const TrainConfig& c);

const char* rotation_name(augment::Rotation r);
augment::Rotation parse_rotation(const std::string& name);

}  // namespace hessl::config

#endif  // HESSL_CONFIG_HPP
