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

#ifndef HESSL_DUAL_ENCODER_HPP
#define HESSL_DUAL_ENCODER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hessl/image.hpp"
#include "hessl/rng.hpp"

namespace hessl::nn {

/// A batch of feature maps, stored channel-major as [c][n][h][w] so that a
/// convolution over the whole batch is a single matrix product.
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}
  double& at(int ni, int ci, int y, int x) {
    return v[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
  double at(int ni, int ci, int y, int x) const {
    return v[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }
};

/// Stack single-channel planes of equal size into an n x 1 x h x w batch.
Tensor make_batch(std::span<const Plane<float>> planes);

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad);

  /// He fan-in normal initialisation scaled by gain; zero bias.
  void init(Stream& rng, double gain = 1.0);
  Tensor forward(const Tensor& in) const;
  /// Accumulates weight/bias gradients; returns d(in) when need_input_grad.
  Tensor backward(const Tensor& in, const Tensor& d_out, bool need_input_grad);

  Param weight;  // [out][in][k][k]
  Param bias;

 private:
  int in_ = 0, out_ = 0, k_ = 0, stride_ = 0, pad_ = 0;
};

/// Dense layer on row-major [n][in] inputs.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  void init(Stream& rng, double gain = 1.0);
  std::vector<double> forward(std::span<const double> x, int n) const;
  std::vector<double> backward(std::span<const double> x, std::span<const double> d_out, int n);
  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

  Param weight;  // [out][in]
  Param bias;

 private:
  int in_ = 0, out_ = 0;
};

struct EncoderSpec {
  int input_channels = 1;
  int stem_width = 16;
  int stem_stride = 1;
  /// One residual block per stage; every stage after the first halves the
  /// resolution.
  std::vector<int> stage_widths{16, 32, 64, 128};
  /// Equal to the last stage width unless a projection is wanted.
  int feature_dim = 128;

  void validate() const;
  bool operator==(const EncoderSpec&) const = default;
};

class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int in_channels, int out_channels, int stride);

  struct Cache {
    Tensor in;
    Tensor mid;
    Tensor out;
  };
  void init(Stream& rng);
  Tensor forward(const Tensor& in, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& d_out, bool need_input_grad);
  std::vector<Param*> parameters();

 private:
  std::string name_;
  Conv2d conv1_, conv2_, shortcut_;
  bool projected_ = false;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const std::string& prefix, const EncoderSpec& spec);

  struct Cache {
    Tensor input;
    Tensor stem_out;
    std::vector<ResidualBlock::Cache> blocks;
    std::vector<double> pooled;
  };

  void init(Stream& rng);
  /// Row-major [n][feature_dim].
  std::vector<double> forward(const Tensor& x, Cache* cache) const;
  void backward(const Cache& cache, std::span<const double> d_features);
  std::vector<Param*> parameters();
  const EncoderSpec& spec() const noexcept { return spec_; }

 private:
  std::string prefix_;
  EncoderSpec spec_;
  Conv2d stem_;
  std::vector<ResidualBlock> blocks_;
  bool projected_ = false;
  Linear projection_;
};

struct DualOutput {
  int n = 0;
  int feature_dim = 0;
  int num_classes = 0;
  std::vector<double> f_h;     // [n][D]
  std::vector<double> f_e;     // [n][D]
  std::vector<double> logits;  // [n][C]
  std::vector<double> probs;   // [n][C]

  std::span<const double> feature_h(int i) const { return {f_h.data() + static_cast<std::size_t>(i) * feature_dim, static_cast<std::size_t>(feature_dim)}; }
  std::span<const double> feature_e(int i) const { return {f_e.data() + static_cast<std::size_t>(i) * feature_dim, static_cast<std::size_t>(feature_dim)}; }
  std::span<const double> prediction(int i) const { return {probs.data() + static_cast<std::size_t>(i) * num_classes, static_cast<std::size_t>(num_classes)}; }
};

/// Separate H and E encoders with one architecture, averaged features, and
/// a linear + softmax head.
class DualEncoder {
 public:
  DualEncoder() = default;
  DualEncoder(const EncoderSpec& spec, int num_classes);

  struct Cache {
    Encoder::Cache h;
    Encoder::Cache e;
    std::vector<double> averaged;
  };

  void init(std::uint64_t seed);
  DualOutput forward(const Tensor& h, const Tensor& e, Cache* cache) const;
  /// Accumulates parameter gradients given gradients on both feature sets
  /// and on the logits.
  void backward(const Cache& cache, std::span<const double> d_f_h, std::span<const double> d_f_e,
                std::span<const double> d_logits);
  void zero_grad();
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  Encoder& encoder_h() noexcept { return enc_h_; }
  Encoder& encoder_e() noexcept { return enc_e_; }
  Linear& head() noexcept { return head_; }
  const EncoderSpec& spec() const noexcept { return spec_; }
  int num_classes() const noexcept { return num_classes_; }

 private:
  EncoderSpec spec_;
  int num_classes_ = 0;
  Encoder enc_h_;
  Encoder enc_e_;
  Linear head_;
};

struct RmsPropConfig {
  double learning_rate = 1e-4;
  double decay_per_epoch = 0.97;
  double rho = 0.99;
  double epsilon = 1e-8;
};

/// RMSProp with an exponentially decaying per-epoch learning rate.
class RmsProp {
 public:
  RmsProp() = default;
  explicit RmsProp(RmsPropConfig config) : config_(config) {}

  double learning_rate(int epoch) const;
  void step(const std::vector<Param*>& params, int epoch);

  const RmsPropConfig& config() const noexcept { return config_; }
  /// Mean-square accumulators, one per parameter in step() order.
  std::vector<std::vector<double>>& state() noexcept { return square_avg_; }
  const std::vector<std::vector<double>>& state() const noexcept { return square_avg_; }

 private:
  RmsPropConfig config_;
  std::vector<std::vector<double>> square_avg_;
};

}  // namespace hessl::nn

#endif  // HESSL_DUAL_ENCODER_HPP
