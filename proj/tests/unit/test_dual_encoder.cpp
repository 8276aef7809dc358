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


#include <cmath>
#include <vector>

#include "doctest.h"
#include "hessl/dual_encoder.hpp"
#include "support/oracles.hpp"

using namespace hessl::nn;
using hessl::Plane;

namespace {

EncoderSpec tiny_spec() {
  EncoderSpec s;
  s.stem_width = 3;
  s.stage_widths = {3, 4};
  s.feature_dim = 4;
  return s;
}

Tensor random_input(int n, int size, std::uint64_t seed) {
  hessl::Stream rng = hessl::make_stream(seed, {});
  Tensor t(n, 1, size, size);
  for (double& v : t.v) v = rng.uniform();
  return t;
}

// Scalar probe: fixed random projection of logits and both feature sets.
struct Probe {
  std::vector<double> wl, wh, we;
  double operator()(const DualOutput& o) const {
    double s = 0.0;
    for (std::size_t i = 0; i < o.logits.size(); ++i) s += wl[i] * o.logits[i];
    for (std::size_t i = 0; i < o.f_h.size(); ++i) s += wh[i] * o.f_h[i] + we[i] * o.f_e[i];
    return s;
  }
};

}  // namespace

TEST_CASE("batch tensor layout") {
  std::vector<Plane<float>> planes{Plane<float>(2, 2, 1.0f), Plane<float>(2, 2, 2.0f)};
  const Tensor t = make_batch(planes);
  CHECK(t.n == 2);
  CHECK(t.c == 1);
  CHECK(t.at(1, 0, 1, 1) == 2.0);
  CHECK_THROWS_AS(make_batch(std::vector<Plane<float>>{}), hessl::Error);
}

TEST_CASE("forward pass is deterministic for a fixed seed") {
  DualEncoder a(tiny_spec(), 3), b(tiny_spec(), 3);
  a.init(11);
  b.init(11);
  const Tensor h = random_input(3, 10, 1), e = random_input(3, 10, 2);
  const auto oa = a.forward(h, e, nullptr);
  const auto ob = b.forward(h, e, nullptr);
  CHECK(oa.probs == ob.probs);
  CHECK(oa.f_h == ob.f_h);
  CHECK(oa.f_h.size() == 3u * 4u);
}

TEST_CASE("zero head predicts the uniform distribution") {
  DualEncoder m(tiny_spec(), 5);
  m.init(3);
  std::fill(m.head().weight.value.begin(), m.head().weight.value.end(), 0.0);
  std::fill(m.head().bias.value.begin(), m.head().bias.value.end(), 0.0);
  const auto out = m.forward(random_input(2, 8, 4), random_input(2, 8, 5), nullptr);
  for (double p : out.probs) CHECK(p == doctest::Approx(0.2));
}

TEST_CASE("swapping encoders together with inputs leaves predictions unchanged") {
  DualEncoder m(tiny_spec(), 3);
  m.init(8);
  const Tensor h = random_input(2, 12, 6), e = random_input(2, 12, 7);
  const auto before = m.forward(h, e, nullptr);
  auto ph = m.encoder_h().parameters();
  auto pe = m.encoder_e().parameters();
  REQUIRE(ph.size() == pe.size());
  for (std::size_t i = 0; i < ph.size(); ++i) std::swap(ph[i]->value, pe[i]->value);
  const auto after = m.forward(e, h, nullptr);
  for (std::size_t i = 0; i < before.probs.size(); ++i) CHECK(after.probs[i] == doctest::Approx(before.probs[i]).epsilon(1e-12));
}

TEST_CASE("zero upstream gradient gives zero head gradient") {
  DualEncoder m(tiny_spec(), 3);
  m.init(2);
  DualEncoder::Cache cache;
  const auto out = m.forward(random_input(2, 8, 1), random_input(2, 8, 2), &cache);
  m.zero_grad();
  m.backward(cache, {}, {}, std::vector<double>(out.logits.size(), 0.0));
  for (double g : m.head().weight.grad) CHECK(g == 0.0);
  for (double g : m.head().bias.grad) CHECK(g == 0.0);
}

TEST_CASE("analytic parameter gradients match central differences") {
  DualEncoder m(tiny_spec(), 3);
  m.init(21);
  const Tensor h = random_input(2, 9, 31), e = random_input(2, 9, 32);
  hessl::Stream rng = hessl::make_stream(77, {});
  DualEncoder::Cache cache;
  const auto out = m.forward(h, e, &cache);
  Probe probe;
  for (std::size_t i = 0; i < out.logits.size(); ++i) probe.wl.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < out.f_h.size(); ++i) {
    probe.wh.push_back(rng.uniform(-1, 1));
    probe.we.push_back(rng.uniform(-1, 1));
  }
  m.zero_grad();
  m.backward(cache, probe.wh, probe.we, probe.wl);

  const double step = 1e-5;
  int checked = 0, skipped = 0;
  for (Param* p : m.parameters()) {
    for (int probe_no = 0; probe_no < 6; ++probe_no) {
      const std::size_t j = rng.below(p->value.size());
      const double keep = p->value[j];
      p->value[j] = keep + step;
      const double up = probe(m.forward(h, e, nullptr));
      p->value[j] = keep - step;
      const double dn = probe(m.forward(h, e, nullptr));
      p->value[j] = keep;
      const double mid = probe(m.forward(h, e, nullptr));
      const double right = (up - mid) / step, left = (mid - dn) / step;
      // A ReLU switching inside the stencil shows up as unequal one-sided slopes.
      if (std::abs(right - left) > 1e-4 * std::max(1.0, std::abs(right))) {
        ++skipped;
        continue;
      }
      ++checked;
      const double fd = (up - dn) / (2 * step);
      INFO(p->name, "[", j, "] analytic ", p->grad[j], " numeric ", fd);
      CHECK(hessl::oracle::relative_error(fd, p->grad[j]) < 1e-4);
    }
  }
  CHECK(checked > 5 * skipped);
}

TEST_CASE("input and feature gradients of a convolution") {
  Conv2d conv("c", 2, 3, 3, 2, 1);
  hessl::Stream rng = hessl::make_stream(4, {});
  conv.init(rng);
  Tensor x(2, 2, 7, 7);
  for (double& v : x.v) v = rng.uniform(-1, 1);
  const Tensor y = conv.forward(x);
  CHECK(y.h == 4);
  Tensor dy(y.n, y.c, y.h, y.w);
  for (double& v : dy.v) v = rng.uniform(-1, 1);
  const Tensor dx = conv.backward(x, dy, true);
  auto f = [&](const Tensor& in) {
    const Tensor o = conv.forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < o.v.size(); ++i) s += o.v[i] * dy.v[i];
    return s;
  };
  for (std::size_t j = 0; j < x.v.size(); j += 5) {
    Tensor a = x, b = x;
    a.v[j] += 1e-5;
    b.v[j] -= 1e-5;
    CHECK(hessl::oracle::relative_error((f(a) - f(b)) / 2e-5, dx.v[j]) < 1e-4);
  }
}

TEST_CASE("non-finite activations are reported with the layer") {
  DualEncoder m(tiny_spec(), 3);
  m.init(1);
  m.head().bias.value[0] = std::nan("");
  try {
    m.forward(random_input(1, 8, 1), random_input(1, 8, 2), nullptr);
    FAIL("expected a numeric fault");
  } catch (const hessl::Error& e) {
    CHECK(e.kind() == hessl::ErrorKind::kNumericFault);
    CHECK(std::string(e.what()).find("head") != std::string::npos);
  }
}

TEST_CASE("optimizer learning rate decays per epoch") {
  RmsPropConfig cfg;
  cfg.learning_rate = 1e-3;
  RmsProp opt(cfg);
  CHECK(opt.learning_rate(0) == doctest::Approx(1e-3));
  CHECK(opt.learning_rate(2) == doctest::Approx(1e-3 * 0.97 * 0.97));
  Param p{"w", {1.0, -1.0}, {0.5, -2.0}};
  opt.step({&p}, 0);
  // First step: mean square = (1 - rho) g^2, update = lr g / sqrt(.)
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3 / std::sqrt(0.01)));
  CHECK(p.value[1] == doctest::Approx(-1.0 + 1e-3 / std::sqrt(0.01)));
}

TEST_CASE("encoder spec validation") {
  EncoderSpec s = tiny_spec();
  CHECK_NOTHROW(s.validate());
  s.stem_width = 0;
  CHECK_THROWS_AS(s.validate(), hessl::Error);
}
