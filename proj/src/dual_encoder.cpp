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

#include "hessl/dual_encoder.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace hessl::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

double normal(Stream& rng) {
  // Box-Muller; explicit so draws are identical on every platform.
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void check_finite(std::span<const double> v, const std::string& layer) {
  for (double x : v)
    if (!std::isfinite(x)) fail(ErrorKind::kNumericFault, "non-finite activation in layer " + layer);
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// d_in *= (activation > 0)
void relu_mask(std::vector<double>& grad, const std::vector<double>& activation) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
}

Param make_param(std::string name, std::size_t size) { return {std::move(name), std::vector<double>(size, 0.0), std::vector<double>(size, 0.0)}; }

}  // namespace

Tensor make_batch(std::span<const Plane<float>> planes) {
  if (planes.empty()) fail(ErrorKind::kInvalidInput, "empty batch");
  const int h = planes.front().height;
  const int w = planes.front().width;
  Tensor t(static_cast<int>(planes.size()), 1, h, w);
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].width != w || planes[i].height != h) fail(ErrorKind::kInvalidInput, "batch planes differ in size");
    std::copy(planes[i].data.begin(), planes[i].data.end(), t.v.begin() + static_cast<std::ptrdiff_t>(i * planes[i].size()));
  }
  return t;
}

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight(make_param(name + ".weight", static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel)),
      bias(make_param(name + ".bias", static_cast<std::size_t>(out_channels))),
      in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(pad) {}

void Conv2d::init(Stream& rng, double gain) {
  const double std_dev = gain * std::sqrt(2.0 / (in_ * k_ * k_));
  for (double& w : weight.value) w = std_dev * normal(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

namespace {

struct ConvGeometry {
  int oh, ow, rows;
  std::size_t cols;
};

ConvGeometry geometry(const Tensor& in, int k, int stride, int pad) {
  const int oh = (in.h + 2 * pad - k) / stride + 1;
  const int ow = (in.w + 2 * pad - k) / stride + 1;
  if (oh < 1 || ow < 1) fail(ErrorKind::kInvalidInput, "convolution input too small");
  return {oh, ow, in.c * k * k, static_cast<std::size_t>(in.n) * oh * ow};
}

// Output columns ox whose input column ox * stride + kx - pad lies inside
// [0, width).
std::pair<int, int> valid_range(int width, int ow, int kx, int stride, int pad) {
  int lo = 0;
  while (lo < ow && lo * stride + kx - pad < 0) ++lo;
  int hi = ow;
  while (hi > lo && (hi - 1) * stride + kx - pad >= width) --hi;
  return {lo, hi};
}

// Columns for samples [n0, n1) only, so the scratch matrix stays cache sized.
void im2col(const Tensor& in, int n0, int n1, int k, int stride, int pad, const ConvGeometry& g, RowMatrix& col) {
  const std::size_t per = static_cast<std::size_t>(g.oh) * g.ow;
  const std::size_t cols = per * static_cast<std::size_t>(n1 - n0);
  col.resize(g.rows, static_cast<Eigen::Index>(cols));
  for (int ci = 0; ci < in.c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * cols;
        for (int ni = n0; ni < n1; ++ni) {
          const double* src = &in.v[(static_cast<std::size_t>(ci) * in.n + ni) * in.h * in.w];
          for (int oy = 0; oy < g.oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.h) {
              std::fill(row, row + g.ow, 0.0);
              row += g.ow;
              continue;
            }
            const double* line = src + static_cast<std::size_t>(iy) * in.w;
            const auto [lo, hi] = valid_range(in.w, g.ow, kx, stride, pad);
            std::fill(row, row + lo, 0.0);
            if (stride == 1) {
              std::copy(line + lo + kx - pad, line + hi + kx - pad, row + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) row[ox] = line[ox * stride + kx - pad];
            }
            std::fill(row + hi, row + g.ow, 0.0);
            row += g.ow;
          }
        }
      }
}

void col2im(const RowMatrix& col, int n0, int n1, Tensor& d_in, int k, int stride, int pad, const ConvGeometry& g) {
  const std::size_t cols = static_cast<std::size_t>(g.oh) * g.ow * static_cast<std::size_t>(n1 - n0);
  for (int ci = 0; ci < d_in.c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * cols;
        for (int ni = n0; ni < n1; ++ni) {
          double* dst = &d_in.v[(static_cast<std::size_t>(ci) * d_in.n + ni) * d_in.h * d_in.w];
          for (int oy = 0; oy < g.oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= d_in.h) {
              row += g.ow;
              continue;
            }
            double* line = dst + static_cast<std::size_t>(iy) * d_in.w;
            const auto [lo, hi] = valid_range(d_in.w, g.ow, kx, stride, pad);
            for (int ox = lo; ox < hi; ++ox) line[ox * stride + kx - pad] += row[ox];
            row += g.ow;
          }
        }
      }
}

// Samples per im2col chunk: about 4096 output columns.
int chunk_samples(const ConvGeometry& g, int n) {
  const int per = g.oh * g.ow;
  return std::clamp(4096 / std::max(per, 1), 1, n);
}

}  // namespace

Tensor Conv2d::forward(const Tensor& in) const {
  if (in.c != in_) fail(ErrorKind::kInvalidInput, weight.name + ": channel mismatch");
  const ConvGeometry g = geometry(in, k_, stride_, pad_);
  Tensor out(in.n, out_, g.oh, g.ow);
  ConstMatMap w(weight.value.data(), out_, g.rows);
  MatMap o(out.v.data(), out_, static_cast<Eigen::Index>(g.cols));
  if (k_ == 1 && stride_ == 1 && pad_ == 0) {
    o.noalias() = w * ConstMatMap(in.v.data(), in_, static_cast<Eigen::Index>(g.cols));
  } else {
    const Eigen::Index per = static_cast<Eigen::Index>(g.oh) * g.ow;
    const int step = chunk_samples(g, in.n);
    RowMatrix col;
    for (int n0 = 0; n0 < in.n; n0 += step) {
      const int n1 = std::min(in.n, n0 + step);
      im2col(in, n0, n1, k_, stride_, pad_, g, col);
      o.middleCols(n0 * per, (n1 - n0) * per).noalias() = w * col;
    }
  }
  for (int c = 0; c < out_; ++c) o.row(c).array() += bias.value[static_cast<std::size_t>(c)];
  return out;
}

Tensor Conv2d::backward(const Tensor& in, const Tensor& d_out, bool need_input_grad) {
  const ConvGeometry g = geometry(in, k_, stride_, pad_);
  ConstMatMap d(d_out.v.data(), out_, static_cast<Eigen::Index>(g.cols));
  MatMap gw(weight.grad.data(), out_, g.rows);
  ConstMatMap w(weight.value.data(), out_, g.rows);
  for (int c = 0; c < out_; ++c) {
    const double* row = d_out.v.data() + static_cast<std::size_t>(c) * g.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < g.cols; ++j) acc += row[j];
    bias.grad[static_cast<std::size_t>(c)] += acc;
  }
  Tensor d_in;
  if (need_input_grad) d_in = Tensor(in.n, in.c, in.h, in.w);
  if (k_ == 1 && stride_ == 1 && pad_ == 0) {
    gw.noalias() += d * ConstMatMap(in.v.data(), in_, static_cast<Eigen::Index>(g.cols)).transpose();
    if (need_input_grad)
      MatMap(d_in.v.data(), in_, static_cast<Eigen::Index>(g.cols)).noalias() = w.transpose() * d;
    return d_in;
  }
  const Eigen::Index per = static_cast<Eigen::Index>(g.oh) * g.ow;
  const int step = chunk_samples(g, in.n);
  RowMatrix col, d_col;
  for (int n0 = 0; n0 < in.n; n0 += step) {
    const int n1 = std::min(in.n, n0 + step);
    const auto d_block = d.middleCols(n0 * per, (n1 - n0) * per);
    im2col(in, n0, n1, k_, stride_, pad_, g, col);
    gw.noalias() += d_block * col.transpose();
    if (need_input_grad) {
      d_col.noalias() = w.transpose() * d_block;
      col2im(d_col, n0, n1, d_in, k_, stride_, pad_, g);
    }
  }
  return d_in;
}

// ---- Linear ---------------------------------------------------------------

Linear::Linear(std::string name, int in_features, int out_features)
    : weight(make_param(name + ".weight", static_cast<std::size_t>(in_features) * out_features)),
      bias(make_param(name + ".bias", static_cast<std::size_t>(out_features))),
      in_(in_features), out_(out_features) {}

void Linear::init(Stream& rng, double gain) {
  const double std_dev = gain * std::sqrt(1.0 / in_);
  for (double& w : weight.value) w = std_dev * normal(rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

std::vector<double> Linear::forward(std::span<const double> x, int n) const {
  std::vector<double> y(static_cast<std::size_t>(n) * out_);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.data() + static_cast<std::size_t>(i) * in_;
    for (int o = 0; o < out_; ++o) {
      const double* wo = weight.value.data() + static_cast<std::size_t>(o) * in_;
      double acc = bias.value[static_cast<std::size_t>(o)];
      for (int k = 0; k < in_; ++k) acc += xi[k] * wo[k];
      y[static_cast<std::size_t>(i) * out_ + o] = acc;
    }
  }
  return y;
}

std::vector<double> Linear::backward(std::span<const double> x, std::span<const double> d_out, int n) {
  std::vector<double> dx(static_cast<std::size_t>(n) * in_);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.data() + static_cast<std::size_t>(i) * in_;
    double* dxi = dx.data() + static_cast<std::size_t>(i) * in_;
    for (int o = 0; o < out_; ++o) {
      const double g = d_out[static_cast<std::size_t>(i) * out_ + o];
      double* gw = weight.grad.data() + static_cast<std::size_t>(o) * in_;
      const double* wo = weight.value.data() + static_cast<std::size_t>(o) * in_;
      bias.grad[static_cast<std::size_t>(o)] += g;
      for (int k = 0; k < in_; ++k) {
        gw[k] += g * xi[k];
        dxi[k] += g * wo[k];
      }
    }
  }
  return dx;
}

// ---- ResidualBlock ----------------------------------------------------------

ResidualBlock::ResidualBlock(const std::string& name, int in_channels, int out_channels, int stride)
    : name_(name),
      conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1),
      projected_(in_channels != out_channels || stride != 1) {
  if (projected_) shortcut_ = Conv2d(name + ".shortcut", in_channels, out_channels, 1, stride, 0);
}

void ResidualBlock::init(Stream& rng) {
  conv1_.init(rng);
  // Damp the residual branch so activations do not grow block over block.
  conv2_.init(rng, 0.5);
  if (projected_) shortcut_.init(rng);
}

Tensor ResidualBlock::forward(const Tensor& in, Cache* cache) const {
  Tensor mid = conv1_.forward(in);
  relu_inplace(mid.v);
  Tensor out = conv2_.forward(mid);
  if (projected_) {
    const Tensor sc = shortcut_.forward(in);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += sc.v[i];
  } else {
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += in.v[i];
  }
  relu_inplace(out.v);
  check_finite(out.v, name_);
  if (cache) {
    cache->in = in;
    cache->mid = std::move(mid);
    cache->out = out;
  }
  return out;
}

Tensor ResidualBlock::backward(const Cache& cache, const Tensor& d_out, bool need_input_grad) {
  Tensor d_sum = d_out;
  relu_mask(d_sum.v, cache.out.v);
  Tensor d_mid = conv2_.backward(cache.mid, d_sum, true);
  relu_mask(d_mid.v, cache.mid.v);
  Tensor d_in = conv1_.backward(cache.in, d_mid, need_input_grad);
  if (projected_) {
    const Tensor d_sc = shortcut_.backward(cache.in, d_sum, need_input_grad);
    if (need_input_grad)
      for (std::size_t i = 0; i < d_in.v.size(); ++i) d_in.v[i] += d_sc.v[i];
  } else if (need_input_grad) {
    for (std::size_t i = 0; i < d_in.v.size(); ++i) d_in.v[i] += d_sum.v[i];
  }
  return d_in;
}

std::vector<Param*> ResidualBlock::parameters() {
  std::vector<Param*> p{&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias};
  if (projected_) {
    p.push_back(&shortcut_.weight);
    p.push_back(&shortcut_.bias);
  }
  return p;
}

// ---- Encoder --------------------------------------------------------------

void EncoderSpec::validate() const {
  if (input_channels < 1 || stem_width < 1 || stem_stride < 1 || feature_dim < 1)
    fail(ErrorKind::kConfiguration, "encoder dimensions must be positive");
  for (int w : stage_widths)
    if (w < 1) fail(ErrorKind::kConfiguration, "encoder stage widths must be positive");
}

Encoder::Encoder(const std::string& prefix, const EncoderSpec& spec)
    : prefix_(prefix), spec_(spec), stem_(prefix + ".stem", spec.input_channels, spec.stem_width, 3, spec.stem_stride, 1) {
  spec.validate();
  int width = spec.stem_width;
  for (std::size_t s = 0; s < spec.stage_widths.size(); ++s) {
    blocks_.emplace_back(prefix + ".stage" + std::to_string(s), width, spec.stage_widths[s], s == 0 ? 1 : 2);
    width = spec.stage_widths[s];
  }
  projected_ = width != spec.feature_dim;
  if (projected_) projection_ = Linear(prefix + ".projection", width, spec.feature_dim);
}

void Encoder::init(Stream& rng) {
  stem_.init(rng);
  for (auto& b : blocks_) b.init(rng);
  if (projected_) projection_.init(rng);
}

std::vector<double> Encoder::forward(const Tensor& x, Cache* cache) const {
  Tensor t = stem_.forward(x);
  relu_inplace(t.v);
  check_finite(t.v, prefix_ + ".stem");
  if (cache) {
    cache->input = x;
    cache->stem_out = t;
    cache->blocks.assign(blocks_.size(), {});
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) t = blocks_[b].forward(t, cache ? &cache->blocks[b] : nullptr);

  const std::size_t plane = static_cast<std::size_t>(t.h) * t.w;
  std::vector<double> pooled(static_cast<std::size_t>(t.n) * t.c);
  for (int ni = 0; ni < t.n; ++ni)
    for (int ci = 0; ci < t.c; ++ci) {
      const double* p = &t.v[(static_cast<std::size_t>(ci) * t.n + ni) * plane];
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      pooled[static_cast<std::size_t>(ni) * t.c + ci] = s / static_cast<double>(plane);
    }
  if (!projected_) {
    if (cache) cache->pooled = pooled;
    return pooled;
  }
  std::vector<double> f = projection_.forward(pooled, t.n);
  check_finite(f, prefix_ + ".projection");
  if (cache) cache->pooled = std::move(pooled);
  return f;
}

void Encoder::backward(const Cache& cache, std::span<const double> d_features) {
  const int n = cache.input.n;
  std::vector<double> d_pooled;
  if (projected_) {
    d_pooled = projection_.backward(cache.pooled, d_features, n);
  } else {
    d_pooled.assign(d_features.begin(), d_features.end());
  }
  const Tensor& last = blocks_.empty() ? cache.stem_out : cache.blocks.back().out;
  Tensor d(last.n, last.c, last.h, last.w);
  const std::size_t plane = static_cast<std::size_t>(last.h) * last.w;
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < last.c; ++ci) {
      const double g = d_pooled[static_cast<std::size_t>(ni) * last.c + ci] / static_cast<double>(plane);
      double* p = &d.v[(static_cast<std::size_t>(ci) * n + ni) * plane];
      for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }
  for (std::size_t b = blocks_.size(); b-- > 0;) d = blocks_[b].backward(cache.blocks[b], d, true);
  relu_mask(d.v, cache.stem_out.v);
  stem_.backward(cache.input, d, false);
}

std::vector<Param*> Encoder::parameters() {
  std::vector<Param*> p{&stem_.weight, &stem_.bias};
  for (auto& b : blocks_)
    for (Param* q : b.parameters()) p.push_back(q);
  if (projected_) {
    p.push_back(&projection_.weight);
    p.push_back(&projection_.bias);
  }
  return p;
}

// ---- DualEncoder ----------------------------------------------------------

DualEncoder::DualEncoder(const EncoderSpec& spec, int num_classes)
    : spec_(spec), num_classes_(num_classes), enc_h_("enc_h", spec), enc_e_("enc_e", spec),
      head_("head", spec.feature_dim, num_classes) {
  if (num_classes < 2) fail(ErrorKind::kConfiguration, "need at least two classes");
}

void DualEncoder::init(std::uint64_t seed) {
  Stream rh = make_stream(seed, {0x494E4954ull, 0});
  Stream re = make_stream(seed, {0x494E4954ull, 1});
  Stream rc = make_stream(seed, {0x494E4954ull, 2});
  enc_h_.init(rh);
  enc_e_.init(re);
  head_.init(rc);
  zero_grad();
}

DualOutput DualEncoder::forward(const Tensor& h, const Tensor& e, Cache* cache) const {
  if (h.n != e.n) fail(ErrorKind::kInvalidInput, "H and E batches differ in size");
  DualOutput out;
  out.n = h.n;
  out.feature_dim = spec_.feature_dim;
  out.num_classes = num_classes_;
  out.f_h = enc_h_.forward(h, cache ? &cache->h : nullptr);
  out.f_e = enc_e_.forward(e, cache ? &cache->e : nullptr);
  std::vector<double> avg(out.f_h.size());
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5 * (out.f_h[i] + out.f_e[i]);
  out.logits = head_.forward(avg, out.n);
  check_finite(out.logits, "head");
  out.probs.resize(out.logits.size());
  for (int i = 0; i < out.n; ++i) {
    const double* z = &out.logits[static_cast<std::size_t>(i) * num_classes_];
    double* p = &out.probs[static_cast<std::size_t>(i) * num_classes_];
    double top = z[0];
    for (int c = 1; c < num_classes_; ++c) top = std::max(top, z[c]);
    double sum = 0.0;
    for (int c = 0; c < num_classes_; ++c) sum += (p[c] = std::exp(z[c] - top));
    for (int c = 0; c < num_classes_; ++c) p[c] /= sum;
  }
  if (cache) cache->averaged = std::move(avg);
  return out;
}

void DualEncoder::backward(const Cache& cache, std::span<const double> d_f_h, std::span<const double> d_f_e,
                           std::span<const double> d_logits) {
  const int n = cache.h.input.n;
  const std::vector<double> d_avg = head_.backward(cache.averaged, d_logits, n);
  std::vector<double> gh(d_avg.size());
  std::vector<double> ge(d_avg.size());
  for (std::size_t i = 0; i < d_avg.size(); ++i) {
    gh[i] = 0.5 * d_avg[i] + (d_f_h.empty() ? 0.0 : d_f_h[i]);
    ge[i] = 0.5 * d_avg[i] + (d_f_e.empty() ? 0.0 : d_f_e[i]);
  }
  enc_h_.backward(cache.h, gh);
  enc_e_.backward(cache.e, ge);
}

void DualEncoder::zero_grad() {
  for (Param* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<Param*> DualEncoder::parameters() {
  std::vector<Param*> p = enc_h_.parameters();
  for (Param* q : enc_e_.parameters()) p.push_back(q);
  p.push_back(&head_.weight);
  p.push_back(&head_.bias);
  return p;
}

std::vector<const Param*> DualEncoder::parameters() const {
  std::vector<const Param*> out;
  for (Param* p : const_cast<DualEncoder*>(this)->parameters()) out.push_back(p);
  return out;
}

// ---- RmsProp ----------------------------------------------------------------

double RmsProp::learning_rate(int epoch) const {
  return config_.learning_rate * std::pow(config_.decay_per_epoch, epoch);
}

void RmsProp::step(const std::vector<Param*>& params, int epoch) {
  if (square_avg_.size() != params.size()) {
    square_avg_.clear();
    for (const Param* p : params) square_avg_.emplace_back(p->value.size(), 0.0);
  }
  const double lr = learning_rate(epoch);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    auto& s = square_avg_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      s[i] = config_.rho * s[i] + (1.0 - config_.rho) * g * g;
      p.value[i] -= lr * g / (std::sqrt(s[i]) + config_.epsilon);
    }
  }
}

}  // namespace hessl::nn
