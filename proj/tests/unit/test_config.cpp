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


#include <string>

#include "doctest.h"
#include "hessl/config.hpp"

using namespace hessl::config;

namespace {

hessl::ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const hessl::Error& e) {
    return e.kind();
  }
  return hessl::ErrorKind::kInvalidInput;
}

}  // namespace

TEST_CASE("defaults") {
  const TrainConfig c = parse_config("");
  CHECK(c.ssl.margin == 37.0);
  CHECK(c.ssl.temperature == 0.5);
  CHECK(c.ssl.k_augment == 2);
  CHECK(c.ssl.alpha == 2.0);
  CHECK(c.ssl.lambda_u == 7.5);
  CHECK(c.ssl.lambda_c == 0.1);
  CHECK(c.optimizer.learning_rate == 1e-4);
  CHECK(c.iterations_per_epoch == 1000);
  CHECK(c.patience_epochs == 100);
  CHECK(c.batch.batch_size() == 64);
  CHECK(c.deterministic);
}

TEST_CASE("sections, comments and typed values") {
  const TrainConfig c = parse_config(R"(
# run settings
manifest = "data/dataset.json"
seed = 1_234
iterations_per_epoch = 50   # short epochs

[ssl]
margin = 0.5
lambda_c = 0

[augment]
rotation = "continuous"
flip_vertical = false

[batch]
per_class_labeled = [11, 11, 11]
unlabeled_count = 31

[encoder]
stage_widths = [8, 16]
feature_dim = 16
)");
  CHECK(c.manifest == "data/dataset.json");
  CHECK(c.seed == 1234);
  CHECK(c.iterations_per_epoch == 50);
  CHECK(c.ssl.margin == 0.5);
  CHECK(c.ssl.lambda_c == 0.0);
  CHECK(c.augment.rotation == hessl::augment::Rotation::kContinuous);
  CHECK_FALSE(c.augment.flip_vertical);
  CHECK(c.batch.batch_size() == 64);
  CHECK(c.encoder.stage_widths == std::vector<int>{8, 16});
}

TEST_CASE("serialization round trip") {
  TrainConfig c = parse_config("seed = 99\n[ssl]\ntemperature = 0.3\n[optimizer]\nlearning_rate = 0.00123\n");
  c.augment.he_brightness_jitter = 0.1 + 0.2;  // not exactly representable in short decimal
  c.stain.max_pixels = 12345;
  const std::string toml = to_toml(c);
  const TrainConfig back = parse_config(toml);
  CHECK(to_toml(back) == toml);
  CHECK(back.augment.he_brightness_jitter == c.augment.he_brightness_jitter);
  CHECK(back.optimizer.learning_rate == 0.00123);
  CHECK(back.stain.max_pixels == 12345);
  CHECK(back.seed == 99);
}

TEST_CASE("unknown and duplicate keys are configuration errors with the line") {
  CHECK(kind_of("[ssl]\nmargn = 3\n") == hessl::ErrorKind::kConfiguration);
  CHECK_THROWS_WITH_AS(parse_config("\n[ssl]\nmargn = 3\n"), doctest::Contains("line 3"), hessl::Error);
  CHECK(kind_of("[nope]\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("seed = 1\nseed = 2\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("seed = \"one\"\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("[augment]\nrotation = \"diagonal\"\n") == hessl::ErrorKind::kConfiguration);
}

TEST_CASE("invalid hyperparameters are rejected") {
  CHECK(kind_of("[ssl]\ntemperature = 0\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("[ssl]\nmargin = -1\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("[ssl]\nk_augment = 0\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("[encoder]\ninput_channels = 3\n") == hessl::ErrorKind::kConfiguration);
  CHECK(kind_of("[batch]\nper_class_labeled = [8, 0]\n") == hessl::ErrorKind::kConfiguration);
}

TEST_CASE("rotation names") {
  for (auto r : {hessl::augment::Rotation::kNone, hessl::augment::Rotation::kRightAngle,
                 hessl::augment::Rotation::kContinuous})
    CHECK(parse_rotation(rotation_name(r)) == r);
}
