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

#include "hessl/ssl_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hessl::ssl {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) fail(ErrorKind::kInvalidInput, std::string(what) + ": dimension mismatch");
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

LabelDistribution::LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) fail(ErrorKind::kInvalidInput, "label distribution needs at least one class");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::kInvalidInput, "label probabilities must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::kInvalidInput, "label probabilities sum to " + std::to_string(sum) + ", not 1");
}

LabelDistribution LabelDistribution::one_hot(int num_classes, int label) {
  if (label < 0 || label >= num_classes) fail(ErrorKind::kInvalidInput, "class index out of range");
  std::vector<double> p(static_cast<std::size_t>(num_classes), 0.0);
  p[static_cast<std::size_t>(label)] = 1.0;
  return LabelDistribution(std::move(p));
}

LabelDistribution LabelDistribution::uniform(int num_classes) {
  if (num_classes < 1) fail(ErrorKind::kInvalidInput, "need at least one class");
  return LabelDistribution(std::vector<double>(static_cast<std::size_t>(num_classes), 1.0 / num_classes));
}

int LabelDistribution::argmax() const {
  return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

void SslHyperParams::validate() const {
  if (!(margin >= 0.0)) fail(ErrorKind::kConfiguration, "margin must be >= 0");
  if (!(temperature > 0.0)) fail(ErrorKind::kConfiguration, "temperature must be > 0");
  if (k_augment < 1) fail(ErrorKind::kConfiguration, "augmentation count K must be >= 1");
  if (!(alpha > 0.0)) fail(ErrorKind::kConfiguration, "Beta parameter alpha must be > 0");
  if (!(lambda_u >= 0.0) || !(lambda_c >= 0.0)) fail(ErrorKind::kConfiguration, "loss weights must be >= 0");
}

double contrastive_loss(std::span<const double> f_h_i, std::span<const double> f_e_i, std::span<const double> f_e_k,
                        double margin) {
  require_same(f_h_i.size(), f_e_i.size(), "contrastive loss");
  require_same(f_h_i.size(), f_e_k.size(), "contrastive loss");
  return std::max(distance(f_h_i, f_e_i) - distance(f_h_i, f_e_k) + margin, 0.0);
}

ContrastiveGrad contrastive_loss_grad(std::span<const double> f_h_i, std::span<const double> f_e_i,
                                      std::span<const double> f_e_k, double margin) {
  ContrastiveGrad g;
  g.loss = contrastive_loss(f_h_i, f_e_i, f_e_k, margin);
  const std::size_t d = f_h_i.size();
  g.d_f_h_i.assign(d, 0.0);
  g.d_f_e_i.assign(d, 0.0);
  g.d_f_e_k.assign(d, 0.0);
  if (g.loss <= 0.0) return g;
  const double pos = distance(f_h_i, f_e_i);
  const double neg = distance(f_h_i, f_e_k);
  for (std::size_t j = 0; j < d; ++j) {
    // d|a - b|/da = (a - b)/|a - b|
    const double up = pos > 0.0 ? (f_h_i[j] - f_e_i[j]) / pos : 0.0;
    const double un = neg > 0.0 ? (f_h_i[j] - f_e_k[j]) / neg : 0.0;
    g.d_f_h_i[j] = up - un;
    g.d_f_e_i[j] = -up;
    g.d_f_e_k[j] = un;
  }
  return g;
}

LabelDistribution average_predictions(std::span<const LabelDistribution> preds) {
  if (preds.empty()) fail(ErrorKind::kInvalidInput, "cannot average zero predictions");
  const int c = preds.front().size();
  std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
  for (const auto& p : preds) {
    require_same(static_cast<std::size_t>(p.size()), static_cast<std::size_t>(c), "average predictions");
    for (int j = 0; j < c; ++j) mean[static_cast<std::size_t>(j)] += p[j];
  }
  for (double& v : mean) v /= static_cast<double>(preds.size());
  return LabelDistribution(std::move(mean));
}

LabelDistribution sharpen(const LabelDistribution& y, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorKind::kInvalidInput, "sharpening temperature must be > 0");
  if (temperature == 1.0) return y;
  const double inv_t = 1.0 / temperature;
  std::vector<double> logs(static_cast<std::size_t>(y.size()));
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < y.size(); ++c) {
    logs[static_cast<std::size_t>(c)] = y[c] > 0.0 ? inv_t * std::log(y[c]) : -std::numeric_limits<double>::infinity();
    top = std::max(top, logs[static_cast<std::size_t>(c)]);
  }
  double sum = 0.0;
  for (double& l : logs) {
    l = std::exp(l - top);  // exp(-inf) = 0: the continuous limit of 0^(1/T)
    sum += l;
  }
  for (double& l : logs) l /= sum;
  return LabelDistribution(std::move(logs));
}

double entropy(const LabelDistribution& y) {
  double h = 0.0;
  for (double p : y.probs())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double mix_coefficient(double lambda_raw) {
  if (!(lambda_raw >= 0.0 && lambda_raw <= 1.0)) fail(ErrorKind::kInvalidInput, "mixup lambda must lie in [0, 1]");
  return std::max(lambda_raw, 1.0 - lambda_raw);
}

LabelDistribution mix_labels(const LabelDistribution& a, const LabelDistribution& b, double lambda_raw) {
  require_same(static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()), "mixup labels");
  const double lam = mix_coefficient(lambda_raw);
  std::vector<double> y(static_cast<std::size_t>(a.size()));
  for (int c = 0; c < a.size(); ++c) y[static_cast<std::size_t>(c)] = lam * a[c] + (1.0 - lam) * b[c];
  return LabelDistribution(std::move(y));
}

MixSample mixup(const MixSample& a, const MixSample& b, double lambda_raw) {
  if (!a.h.same_shape(b.h) || !a.e.same_shape(b.e) || !a.h.same_shape(a.e))
    fail(ErrorKind::kInvalidInput, "mixup: sample shapes differ");
  const double lam = mix_coefficient(lambda_raw);
  MixSample out{a.h, a.e, mix_labels(a.label, b.label, lambda_raw), a.labeled};
  for (std::size_t i = 0; i < out.h.size(); ++i) {
    out.h.data[i] = static_cast<float>(lam * a.h.data[i] + (1.0 - lam) * b.h.data[i]);
    out.e.data[i] = static_cast<float>(lam * a.e.data[i] + (1.0 - lam) * b.e.data[i]);
  }
  return out;
}

double cross_entropy(std::span<const double> prediction, std::span<const double> target) {
  require_same(prediction.size(), target.size(), "cross-entropy");
  double s = 0.0;
  for (std::size_t c = 0; c < prediction.size(); ++c)
    if (target[c] != 0.0) s -= target[c] * std::log(std::max(prediction[c], kProbabilityFloor));
  return s;
}

double squared_l2(std::span<const double> prediction, std::span<const double> target) {
  require_same(prediction.size(), target.size(), "squared L2");
  double s = 0.0;
  for (std::size_t c = 0; c < prediction.size(); ++c) s += (target[c] - prediction[c]) * (target[c] - prediction[c]);
  return s;
}

std::vector<double> cross_entropy_grad(std::span<const double> prediction, std::span<const double> target) {
  require_same(prediction.size(), target.size(), "cross-entropy");
  std::vector<double> g(prediction.size(), 0.0);
  for (std::size_t c = 0; c < prediction.size(); ++c)
    if (target[c] != 0.0 && prediction[c] > kProbabilityFloor) g[c] = -target[c] / prediction[c];
  return g;
}

std::vector<double> squared_l2_grad(std::span<const double> prediction, std::span<const double> target) {
  require_same(prediction.size(), target.size(), "squared L2");
  std::vector<double> g(prediction.size());
  for (std::size_t c = 0; c < prediction.size(); ++c) g[c] = 2.0 * (prediction[c] - target[c]);
  return g;
}

LossBreakdown total_loss(std::span<const PredictionTarget> labeled, std::span<const PredictionTarget> unlabeled,
                         std::span<const double> contrastive_terms, const SslHyperParams& params) {
  if (labeled.empty()) fail(ErrorKind::kInvalidInput, "total loss needs at least one labeled sample");
  LossBreakdown out;
  for (const auto& s : labeled) out.ce += cross_entropy(s.prediction.probs(), s.target.probs());
  out.ce /= static_cast<double>(labeled.size());
  if (!unlabeled.empty()) {
    const int c = unlabeled.front().prediction.size();
    for (const auto& s : unlabeled) out.l2 += squared_l2(s.prediction.probs(), s.target.probs());
    out.l2 /= static_cast<double>(c) * static_cast<double>(unlabeled.size());
  }
  for (double t : contrastive_terms) out.contrastive += t;
  out.total = out.ce + params.lambda_u * out.l2 + params.lambda_c * out.contrastive;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double top = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> d_probs) {
  require_same(probs.size(), d_probs.size(), "softmax backward");
  double inner = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) inner += probs[c] * d_probs[c];
  std::vector<double> dz(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) dz[c] = probs[c] * (d_probs[c] - inner);
  return dz;
}

}  // namespace hessl::ssl
