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
#include "hessl/rng.hpp"
#include "hessl/ssl_losses.hpp"
#include "support/oracles.hpp"

using hessl::Plane;
using namespace hessl::ssl;
namespace oracle = hessl::oracle;

namespace {

std::vector<double> random_simplex(hessl::Stream& rng, int c) {
  std::vector<double> p(static_cast<std::size_t>(c));
  double s = 0.0;
  for (double& v : p) {
    v = -std::log(1.0 - rng.uniform()) + 1e-3;
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

std::vector<double> random_vec(hessl::Stream& rng, int d, double scale) {
  std::vector<double> v(static_cast<std::size_t>(d));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("contrastive loss examples") {
  const std::vector<double> z{0, 0};
  CHECK(contrastive_loss(z, z, std::vector<double>{37, 0}, 37.0) == 0.0);
  CHECK(contrastive_loss(z, z, std::vector<double>{10, 0}, 37.0) == doctest::Approx(27.0));
  CHECK(contrastive_loss(std::vector<double>{1, 0}, z, z, 0.0) == 0.0);
  CHECK_THROWS_AS(contrastive_loss(z, std::vector<double>{0, 0, 0}, z, 1.0), hessl::Error);
}

TEST_CASE("contrastive loss is non-negative and zero for well separated triples") {
  hessl::Stream rng = hessl::make_stream(1, {});
  for (int t = 0; t < 200; ++t) {
    const auto a = random_vec(rng, 6, 2.0), b = random_vec(rng, 6, 2.0), c = random_vec(rng, 6, 2.0);
    CHECK(contrastive_loss(a, b, c, 1.0) >= 0.0);
  }
  const FeaturePair pair{{0, 0}, {0.1, 0}};
  CHECK(contrastive_loss(pair, std::vector<double>{5, 0}, 1.0) == 0.0);
}

TEST_CASE("averaging predictions") {
  const LabelDistribution a({0.8, 0.2}), b({0.6, 0.4});
  const std::vector<LabelDistribution> one{a};
  CHECK(average_predictions(one) == a);
  const std::vector<LabelDistribution> two{a, b};
  const auto m = average_predictions(two);
  CHECK(m[0] == doctest::Approx(0.7));
  CHECK(m[1] == doctest::Approx(0.3));
  const std::vector<LabelDistribution> sym{LabelDistribution({1, 0}), LabelDistribution({0, 1})};
  CHECK(average_predictions(sym)[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(average_predictions(std::vector<LabelDistribution>{}), hessl::Error);
}

TEST_CASE("sharpening") {
  const LabelDistribution y({0.8, 0.2});
  CHECK(sharpen(y, 1.0) == y);
  const auto s = sharpen(y, 0.5);
  CHECK(s[0] == doctest::Approx(0.64 / 0.68));
  CHECK(s[1] == doctest::Approx(0.04 / 0.68));
  CHECK(s[0] == doctest::Approx(0.9412).epsilon(1e-4));
  const auto flat = sharpen(LabelDistribution({0.5, 0.5}), 0.3);
  CHECK(flat[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(sharpen(y, 0.0), hessl::Error);
}

TEST_CASE("sharpening keeps the simplex and argmax and lowers entropy") {
  hessl::Stream rng = hessl::make_stream(2, {});
  for (int t = 0; t < 2000; ++t) {
    const int c = 2 + static_cast<int>(rng.below(9));
    const LabelDistribution y(random_simplex(rng, c));
    const double temp = rng.uniform(0.05, 0.99);
    const auto s = sharpen(y, temp);
    double sum = 0.0;
    for (double v : s.probs()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.argmax() == y.argmax());
    CHECK(entropy(s) <= entropy(y) + 1e-12);
  }
}

TEST_CASE("mixup examples") {
  CHECK(mix_coefficient(0.3) == doctest::Approx(0.7));
  CHECK(mix_coefficient(0.5) == 0.5);
  const auto y = mix_labels(LabelDistribution({1, 0}), LabelDistribution({0, 1}), 0.3);
  CHECK(y[0] == doctest::Approx(0.7));
  CHECK(y[1] == doctest::Approx(0.3));

  MixSample a{Plane<float>(2, 2, 0.25f), Plane<float>(2, 2, 0.75f), LabelDistribution({0.2, 0.8}), true};
  const auto same = mixup(a, a, 0.37);
  CHECK(same.h == a.h);
  CHECK(same.e == a.e);
  CHECK(same.label[0] == doctest::Approx(0.2));
  CHECK(same.labeled);

  MixSample b{Plane<float>(3, 2), Plane<float>(3, 2), LabelDistribution({1, 0}), false};
  CHECK_THROWS_AS(mixup(a, b, 0.5), hessl::Error);
  CHECK_THROWS_AS(mix_coefficient(1.5), hessl::Error);
}

TEST_CASE("mixup coefficient and label convexity under Beta(2,2)") {
  hessl::Stream rng = hessl::make_stream(3, {});
  for (int t = 0; t < 2000; ++t) {
    const double lam = rng.beta(2.0, 2.0);
    const double lp = mix_coefficient(lam);
    CHECK((lp >= 0.5 && lp <= 1.0));
    const LabelDistribution ya(random_simplex(rng, 4)), yb(random_simplex(rng, 4));
    const auto y = mix_labels(ya, yb, lam);
    for (int c = 0; c < 4; ++c) {
      CHECK(y[c] >= std::min(ya[c], yb[c]) - 1e-15);
      CHECK(y[c] <= std::max(ya[c], yb[c]) + 1e-15);
    }
  }
}

TEST_CASE("total loss examples") {
  const auto onehot = LabelDistribution::one_hot(3, 1);
  const std::vector<PredictionTarget> lab{{onehot, onehot}};
  SslHyperParams hp;
  CHECK(total_loss(lab, {}, {}, hp).total == 0.0);

  const std::vector<PredictionTarget> unl{{LabelDistribution({0.5, 0.5}), LabelDistribution({1, 0})}};
  const std::vector<PredictionTarget> lab2{{LabelDistribution({1, 0}), LabelDistribution({1, 0})}};
  hp.lambda_u = 1.0;
  const auto l = total_loss(lab2, unl, {}, hp);
  CHECK(l.l2 == doctest::Approx(0.25));
  CHECK(l.total == doctest::Approx(0.25));
  CHECK_THROWS_AS(total_loss({}, unl, {}, hp), hessl::Error);
}

TEST_CASE("total loss is homogeneous in its weights") {
  hessl::Stream rng = hessl::make_stream(4, {});
  std::vector<PredictionTarget> lab, unl;
  for (int i = 0; i < 5; ++i) lab.push_back({LabelDistribution(random_simplex(rng, 3)), LabelDistribution::one_hot(3, i % 3)});
  for (int i = 0; i < 7; ++i) unl.push_back({LabelDistribution(random_simplex(rng, 3)), LabelDistribution(random_simplex(rng, 3))});
  const std::vector<double> terms{0.5, 1.5, 0.0};
  SslHyperParams hp;
  const auto base = total_loss(lab, unl, terms, hp);
  hp.lambda_u *= 2;
  const auto du = total_loss(lab, unl, terms, hp);
  CHECK(du.total - base.total == doctest::Approx(7.5 * base.l2));
  hp.lambda_c *= 2;
  const auto dc = total_loss(lab, unl, terms, hp);
  CHECK(dc.total - du.total == doctest::Approx(0.1 * base.contrastive));
}

TEST_CASE("loss functions agree with the scalar oracle") {
  hessl::Stream rng = hessl::make_stream(5, {});
  for (int t = 0; t < 500; ++t) {
    const int d = 1 + static_cast<int>(rng.below(8));
    const auto a = random_vec(rng, d, 3), b = random_vec(rng, d, 3), c = random_vec(rng, d, 3);
    const double m = rng.uniform(0, 5);
    CHECK(std::abs(contrastive_loss(a, b, c, m) - oracle::triplet(a, b, c, m)) < 1e-10);

    const int cls = 2 + static_cast<int>(rng.below(6));
    const auto p = random_simplex(rng, cls);
    const double temp = rng.uniform(0.1, 2.0);
    const auto s = sharpen(LabelDistribution(p), temp);
    const auto so = oracle::temper(p, temp);
    for (int k = 0; k < cls; ++k) CHECK(std::abs(s[k] - so[static_cast<std::size_t>(k)]) < 1e-10);
  }
}

TEST_CASE("gradients match central differences") {
  hessl::Stream rng = hessl::make_stream(6, {});
  const double h = 1e-5;
  int checked = 0;
  for (int t = 0; t < 50; ++t) {
    auto a = random_vec(rng, 5, 1), b = random_vec(rng, 5, 1), c = random_vec(rng, 5, 1);
    const double m = 1.0;
    const auto g = contrastive_loss_grad(a, b, c, m);
    const double val = oracle::triplet(a, b, c, m);
    if (val < 1e-3) continue;  // stay away from the hinge
    ++checked;
    std::vector<double>* vecs[3] = {&a, &b, &c};
    const std::vector<double>* grads[3] = {&g.d_f_h_i, &g.d_f_e_i, &g.d_f_e_k};
    for (int v = 0; v < 3; ++v)
      for (std::size_t j = 0; j < 5; ++j) {
        const double keep = (*vecs[v])[j];
        (*vecs[v])[j] = keep + h;
        const double up = oracle::triplet(a, b, c, m);
        (*vecs[v])[j] = keep - h;
        const double dn = oracle::triplet(a, b, c, m);
        (*vecs[v])[j] = keep;
        CHECK(oracle::relative_error((up - dn) / (2 * h), (*grads[v])[j]) < 1e-4);
      }
  }
  CHECK(checked > 10);

  // Cross-entropy and squared error through the softmax, w.r.t. logits.
  for (int t = 0; t < 50; ++t) {
    auto z = random_vec(rng, 4, 2);
    const auto y = random_simplex(rng, 4);
    for (int kind = 0; kind < 2; ++kind) {
      auto f = [&](const std::vector<double>& logits) {
        const auto p = oracle::softmax(logits);
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += kind == 0 ? -y[c] * std::log(p[c]) : (y[c] - p[c]) * (y[c] - p[c]);
        return s;
      };
      const auto p = softmax(z);
      const auto dp = kind == 0 ? cross_entropy_grad(p, y) : squared_l2_grad(p, y);
      const auto dz = softmax_backward(p, dp);
      for (std::size_t j = 0; j < 4; ++j) {
        const double keep = z[j];
        z[j] = keep + h;
        const double up = f(z);
        z[j] = keep - h;
        const double dn = f(z);
        z[j] = keep;
        CHECK(oracle::relative_error((up - dn) / (2 * h), dz[j]) < 1e-4);
      }
    }
  }
}

TEST_CASE("label distribution validation") {
  CHECK_THROWS_AS(LabelDistribution({0.5, 0.6}), hessl::Error);
  CHECK_THROWS_AS(LabelDistribution({-0.1, 1.1}), hessl::Error);
  CHECK_THROWS_AS(LabelDistribution::one_hot(3, 3), hessl::Error);
  CHECK(LabelDistribution::uniform(4)[2] == 0.25);
  SslHyperParams hp;
  CHECK_NOTHROW(hp.validate());
  hp.temperature = 0.0;
  CHECK_THROWS_AS(hp.validate(), hessl::Error);
}
