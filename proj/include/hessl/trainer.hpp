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

#ifndef HESSL_TRAINER_HPP
#define HESSL_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hessl/config.hpp"
#include "hessl/datapipe.hpp"
#include "hessl/dual_encoder.hpp"
#include "hessl/image.hpp"
#include "hessl/stain_model.hpp"

namespace hessl::trainer {

using config::TrainConfig;

/// An RGB training tile together with the basis of the slide it came from.
struct TrainSample {
  RgbImage tile;
  std::shared_ptr<const stain_model::StainBasis> basis;
  int label = -1;  // -1 for unlabeled
};

/// Validation/test tiles are separated once, without augmentation.
struct EvalSample {
  Plane<float> h;
  Plane<float> e;
  int label = -1;
};

struct Datasets {
  std::vector<std::string> classes;
  std::vector<TrainSample> labeled;
  std::vector<TrainSample> unlabeled;
  std::vector<EvalSample> val;
  std::vector<EvalSample> test;
};

/// Separates and (when the policy says so) centre-crops an evaluation tile.
EvalSample prepare_eval(const RgbImage& tile, const stain_model::StainBasis& basis, int label,
                        const augment::AugmentPolicy& policy);

/// Builds datasets from a manifest: reads each slide, estimates or loads its
/// basis, tiles it and drops background tiles. Paths resolve against
/// base_dir.
Datasets load_datasets(const datapipe::DatasetManifest& manifest, const std::string& base_dir,
                       const TrainConfig& config);

struct StepRecord {
  std::uint64_t iteration = 0;
  int epoch = 0;
  double ce = 0.0;
  double l2 = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_total = 0.0;
  double val_balanced_accuracy = 0.0;
  double val_accuracy = 0.0;
  bool improved = false;
};

struct TrainState {
  int epoch = 0;
  std::uint64_t iteration = 0;  // global step counter
  int iteration_in_epoch = 0;
  double best_val_accuracy = -1.0;
  int epochs_since_best = 0;
  int best_epoch = -1;
  bool finished = false;
  bool early_stopped = false;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct FitOptions {
  /// Checkpoints, logs and report land here; empty keeps everything in
  /// memory.
  std::string out_dir;
  bool write_plots = true;
  /// Stop after this many further steps (for resume tests); 0 = no limit.
  std::uint64_t max_steps = 0;
  /// Receives each JSON log line.
  std::function<void(const std::string&)> on_log;
};

struct FitReport {
  datapipe::Metrics best_val;
  datapipe::Metrics test;
  bool has_test = false;
  int best_epoch = -1;
  int epochs_run = 0;
  bool early_stopped = false;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::string config_toml;
  std::uint64_t seed = 0;
};

std::string metrics_to_json(const datapipe::Metrics& m, const std::vector<std::string>& classes);
std::string report_to_json(const FitReport& r, const std::vector<std::string>& classes);

class Trainer {
 public:
  /// The datasets must outlive the trainer.
  Trainer(TrainConfig config, const Datasets& data);

  /// One optimisation step on the batch for the current iteration.
  StepRecord train_step();

  /// Class probabilities [n][C] for evaluation samples, no augmentation.
  std::vector<double> predict(std::span<const EvalSample> samples) const;
  datapipe::Metrics validate(std::span<const EvalSample> samples) const;
  /// Accuracy on the labeled training tiles, centre-cropped, no jitter.
  double train_accuracy() const;

  FitReport fit(const FitOptions& options = {});

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);
  /// Only the best-validation weights, loadable by load_model().
  void save_best_model(const std::string& path) const;

  nn::DualEncoder& model() noexcept { return model_; }
  const nn::DualEncoder& model() const noexcept { return model_; }
  TrainState& state() noexcept { return state_; }
  const TrainState& state() const noexcept { return state_; }
  const TrainConfig& config() const noexcept { return config_; }
  void restore_best();

 private:
  struct View {
    Plane<float> h;
    Plane<float> e;
  };
  View make_view(const TrainSample& s, const Stream& rng) const;
  std::vector<View> make_views(const std::vector<const TrainSample*>& samples,
                               const std::vector<Stream>& streams) const;
  void remember_best();

  TrainConfig config_;
  const Datasets& data_;
  nn::DualEncoder model_;
  nn::RmsProp optimizer_;
  datapipe::BalancedSampler sampler_;
  TrainState state_;
  std::vector<std::vector<double>> best_params_;
  std::vector<EvalSample> train_eval_;
};

struct LoadedModel {
  TrainConfig config;
  std::vector<std::string> classes;
  nn::DualEncoder model;
};
/// Loads either a training checkpoint (best weights if present) or a
/// best-model file.
LoadedModel load_model(const std::string& path);

/// Class probabilities for evaluation samples with any model.
std::vector<double> predict(const nn::DualEncoder& model, std::span<const EvalSample> samples, int batch);

}  // namespace hessl::trainer

#endif  // HESSL_TRAINER_HPP
