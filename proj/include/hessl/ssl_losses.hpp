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

#ifndef HESSL_SSL_LOSSES_HPP
#define HESSL_SSL_LOSSES_HPP

#include <span>
#include <vector>

#include "hessl/image.hpp"

namespace hessl::ssl {

/// A point on the probability simplex: one-hot labels, averaged and
/// sharpened pseudo-labels, and mixed labels all use this type.
class LabelDistribution {
 public:
  LabelDistribution() = default;
  /// Validates non-negativity and unit sum (1e-9).
  explicit LabelDistribution(std::vector<double> probs);
  static LabelDistribution one_hot(int num_classes, int label);
  static LabelDistribution uniform(int num_classes);

  int size() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](int c) const { return probs_[static_cast<std::size_t>(c)]; }
  std::span<const double> probs() const noexcept { return probs_; }
  int argmax() const;
  bool operator==(const LabelDistribution&) const = default;

 private:
  std::vector<double> probs_;
};

struct FeaturePair {
  std::vector<double> f_h;
  std::vector<double> f_e;
};

struct SslHyperParams {
  double margin = 37.0;
  double temperature = 0.5;
  int k_augment = 2;
  double alpha = 2.0;
  double lambda_u = 7.5;
  double lambda_c = 0.1;

  void validate() const;
};

/// max(|f_h_i - f_e_i| - |f_h_i - f_e_k| + m, 0).
double contrastive_loss(std::span<const double> f_h_i, std::span<const double> f_e_i, std::span<const double> f_e_k,
                        double margin);
inline double contrastive_loss(const FeaturePair& pair, std::span<const double> f_e_k, double margin) {
  return contrastive_loss(pair.f_h, pair.f_e, f_e_k, margin);
}

struct ContrastiveGrad {
  double loss = 0.0;
  std::vector<double> d_f_h_i;
  std::vector<double> d_f_e_i;
  std::vector<double> d_f_e_k;
};
/// Loss and its gradient. Inactive hinge gives zero gradients; a zero
/// distance contributes the zero subgradient.
ContrastiveGrad contrastive_loss_grad(std::span<const double> f_h_i, std::span<const double> f_e_i,
                                      std::span<const double> f_e_k, double margin);

LabelDistribution average_predictions(std::span<const LabelDistribution> preds);
/// y_c^(1/T) / sum_j y_j^(1/T), computed in log space so tiny entries do
/// not underflow to an all-zero vector.
LabelDistribution sharpen(const LabelDistribution& y, double temperature);
/// Shannon entropy, natural log.
double entropy(const LabelDistribution& y);

/// max(lambda, 1 - lambda).
double mix_coefficient(double lambda_raw);

struct MixSample {
  Plane<float> h;
  Plane<float> e;
  LabelDistribution label;
  bool labeled = false;
};

/// Convex combination of two samples with lambda' = max(lambda, 1 - lambda)
/// applied to H, E and the label. The result is labeled iff a is.
MixSample mixup(const MixSample& a, const MixSample& b, double lambda_raw);
/// Same combination on raw label vectors.
LabelDistribution mix_labels(const LabelDistribution& a, const LabelDistribution& b, double lambda_raw);

struct PredictionTarget {
  LabelDistribution prediction;
  LabelDistribution target;
};

struct LossBreakdown {
  double ce = 0.0;           // mean cross-entropy over L'
  double l2 = 0.0;           // sum |y - y_hat|^2 / (C |U'|)
  double contrastive = 0.0;  // unweighted sum over L' and U'
  double total = 0.0;        // ce + lambda_u * l2 + lambda_c * contrastive
};

inline constexpr double kProbabilityFloor = 1e-12;

LossBreakdown total_loss(std::span<const PredictionTarget> labeled, std::span<const PredictionTarget> unlabeled,
                         std::span<const double> contrastive_terms, const SslHyperParams& params);

double cross_entropy(std::span<const double> prediction, std::span<const double> target);
double squared_l2(std::span<const double> prediction, std::span<const double> target);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);
/// Pull a gradient with respect to softmax outputs back to the logits.
std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> d_probs);

/// Gradients with respect to the prediction vector (targets are constants).
std::vector<double> cross_entropy_grad(std::span<const double> prediction, std::span<const double> target);
std::vector<double> squared_l2_grad(std::span<const double> prediction, std::span<const double> target);

}  // namespace hessl::ssl

#endif  // HESSL_SSL_LOSSES_HPP
