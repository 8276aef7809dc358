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


#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "hessl/datapipe.hpp"
#include "hessl/rng.hpp"
#include "support/oracles.hpp"

using namespace hessl::datapipe;
using hessl::RgbImage;

namespace {

PolygonAnnotation rect(const std::string& label, double x0, double y0, double x1, double y1) {
  return {label, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

const std::map<std::string, int> kClasses{{"tumor", 0}, {"normal", 1}};

}  // namespace

TEST_CASE("full-cover polygon on a single tile position") {
  const std::vector<PolygonAnnotation> polys{rect("tumor", 0, 0, 400, 400)};
  const auto t = extract_tiles(400, 400, polys, kClasses, {400, 200, 0}, "s");
  REQUIRE(t.labeled.size() == 1);
  CHECK(t.labeled[0].x == 0);
  CHECK(t.labeled[0].y == 0);
  CHECK(t.labeled[0].label == 0);
  CHECK(t.unlabeled.empty());
}

TEST_CASE("grid positions with the tile inside the image") {
  const std::vector<PolygonAnnotation> polys{rect("normal", 0, 0, 800, 400)};
  const auto t = extract_tiles(800, 400, polys, kClasses, {400, 200, 0}, "s");
  REQUIRE(t.labeled.size() == 3);
  std::vector<int> xs;
  for (const auto& s : t.labeled) xs.push_back(s.x);
  CHECK(xs == std::vector<int>{0, 200, 400});
  CHECK(t.labeled[1].label_name == "normal");
}

TEST_CASE("polygon narrower than a tile yields no labeled tile") {
  const std::vector<PolygonAnnotation> polys{rect("tumor", 0, 0, 800, 300)};
  const auto t = extract_tiles(800, 400, polys, kClasses, {400, 200, 0}, "s");
  CHECK(t.labeled.empty());
}

TEST_CASE("no polygons gives only unlabeled tiles") {
  const auto t = extract_tiles(800, 400, {}, kClasses, {400, 200, 0}, "s");
  CHECK(t.labeled.empty());
  CHECK(t.unlabeled.size() == 3);
  for (const auto& s : t.unlabeled) CHECK_FALSE(s.label.has_value());
}

TEST_CASE("tiles touching a polygon are neither labeled nor unlabeled") {
  const std::vector<PolygonAnnotation> polys{rect("tumor", 300, 0, 800, 400)};
  const auto t = extract_tiles(800, 400, polys, kClasses, {400, 100, 0}, "s");
  for (const auto& s : t.unlabeled) CHECK(s.x + 400 <= 300);
  CHECK(t.unlabeled.empty());
  CHECK(t.labeled.size() == 2);
}

TEST_CASE("overlapping polygons do not produce ambiguous labels") {
  const std::vector<PolygonAnnotation> polys{rect("tumor", 0, 0, 400, 400), rect("normal", 0, 0, 400, 400)};
  CHECK(extract_tiles(400, 400, polys, kClasses, {400, 200, 0}, "s").labeled.empty());
}

TEST_CASE("self-intersecting and degenerate polygons are annotation errors") {
  const PolygonAnnotation bowtie{"tumor", {{0, 0}, {10, 10}, {10, 0}, {0, 10}}};
  CHECK_FALSE(is_simple(bowtie.points));
  const PolygonAnnotation flat{"tumor", {{0, 0}, {5, 0}, {10, 0}}};
  CHECK_FALSE(is_simple(flat.points));
  CHECK(is_simple(rect("t", 0, 0, 1, 1).points));
  const std::vector<PolygonAnnotation> polys{rect("tumor", 0, 0, 5, 5), bowtie};
  try {
    validate_polygons(polys);
    FAIL("expected an annotation error");
  } catch (const hessl::Error& e) {
    CHECK(e.kind() == hessl::ErrorKind::kAnnotation);
    CHECK(std::string(e.what()).find("polygon 1") != std::string::npos);
  }
}

TEST_CASE("unknown polygon label is an annotation error") {
  const std::vector<PolygonAnnotation> polys{rect("stroma", 0, 0, 5, 5)};
  CHECK_THROWS_AS(extract_tiles(10, 10, polys, kClasses, {4, 4, 0}, "s"), hessl::Error);
}

TEST_CASE("point in polygon agrees with the ray-casting oracle") {
  hessl::Stream rng = hessl::make_stream(12, {});
  int agree = 0, total = 0;
  for (int t = 0; t < 200; ++t) {
    // Random star-shaped polygon around a centre.
    const int n = 3 + static_cast<int>(rng.below(8));
    std::vector<double> xs, ys;
    std::vector<Point> poly;
    for (int k = 0; k < n; ++k) {
      const double ang = 2 * 3.14159265358979 * (k + rng.uniform(0.1, 0.9)) / n;
      const double r = rng.uniform(2, 10);
      xs.push_back(r * std::cos(ang));
      ys.push_back(r * std::sin(ang));
      poly.push_back({xs.back(), ys.back()});
    }
    for (int q = 0; q < 20; ++q) {
      const double px = rng.uniform(-11, 11), py = rng.uniform(-11, 11);
      agree += point_in_polygon(poly, {px, py}) == hessl::oracle::inside(xs, ys, px, py);
      ++total;
    }
  }
  CHECK(agree == total);
}

TEST_CASE("foreground filter") {
  CHECK_FALSE(foreground_filter(RgbImage(10, 10)));
  CHECK(foreground_filter(RgbImage(10, 10, {60, 40, 120})));
  RgbImage quarter(4, 4);
  for (int x = 0; x < 4; ++x) {
    quarter.at(x, 0, 0) = 50;
    quarter.at(x, 0, 1) = 50;
    quarter.at(x, 0, 2) = 50;
  }
  CHECK(tissue_fraction(quarter) == 0.25);
  CHECK(foreground_filter(quarter, kDefaultTissueOd, 0.25));
  CHECK_FALSE(foreground_filter(quarter, kDefaultTissueOd, 0.26));
}

TEST_CASE("every batch has the exact composition") {
  std::vector<std::vector<std::size_t>> pools(4);
  for (std::size_t i = 0; i < 60; ++i) pools[i % 4].push_back(i);
  pools[3].resize(5);
  std::vector<std::size_t> unl(100);
  for (std::size_t i = 0; i < 100; ++i) unl[i] = 1000 + i;
  BalancedSampler s(pools, unl, BatchComposition::uniform(4, 8, 32), 3);
  std::map<std::size_t, int> seen;
  for (std::uint64_t it = 0; it < 100; ++it) {
    const auto b = s.batch(it);
    if (it < 25)
      for (std::size_t id : b.unlabeled) ++seen[id];
    std::vector<int> count(4, 0);
    for (const auto& [c, id] : b.labeled) {
      ++count[static_cast<std::size_t>(c)];
      CHECK(std::find(pools[static_cast<std::size_t>(c)].begin(), pools[static_cast<std::size_t>(c)].end(), id) !=
            pools[static_cast<std::size_t>(c)].end());
    }
    CHECK(count == std::vector<int>{8, 8, 8, 8});
    CHECK(b.unlabeled.size() == 32);
  }
  // 25 batches of 32 are exactly eight passes over the 100 unlabeled ids.
  CHECK(seen.size() == 100);
  for (const auto& [id, n] : seen) CHECK(n == 8);
}

TEST_CASE("eleven per class plus thirty-one unlabeled makes sixty-four") {
  const auto comp = BatchComposition::uniform(3, 11, 31);
  CHECK(comp.batch_size() == 64);
  std::vector<std::vector<std::size_t>> pools{{0}, {1, 2}, {3, 4, 5}};
  BalancedSampler s(pools, {9, 10}, comp, 1);
  const auto b = s.batch(7);
  CHECK(b.labeled.size() == 33);
  CHECK(b.unlabeled.size() == 31);
  // A one-sample pool fills its quota with that sample.
  for (const auto& [c, id] : b.labeled)
    if (c == 0) CHECK(id == 0);
}

TEST_CASE("batches depend only on seed and iteration") {
  std::vector<std::vector<std::size_t>> pools{{0, 1, 2, 3}, {4, 5, 6}};
  BalancedSampler a(pools, {7, 8, 9}, BatchComposition::uniform(2, 3, 2), 5);
  BalancedSampler b(pools, {7, 8, 9}, BatchComposition::uniform(2, 3, 2), 5);
  std::vector<BatchIndices> forward;
  for (std::uint64_t i = 0; i < 20; ++i) forward.push_back(a.batch(i));
  for (std::uint64_t i = 20; i-- > 0;) {
    const auto x = b.batch(i);
    CHECK(x.labeled == forward[i].labeled);
    CHECK(x.unlabeled == forward[i].unlabeled);
  }
}

TEST_CASE("empty class pool names the class") {
  std::vector<std::vector<std::size_t>> pools{{0}, {}};
  CHECK_THROWS_WITH_AS(BalancedSampler(pools, {}, BatchComposition::uniform(2, 1, 0), 0, {"tumor", "normal"}),
                       doctest::Contains("normal"), hessl::Error);
}

TEST_CASE("balanced accuracy") {
  const ConfusionMatrix diag{{5, 0, 0}, {0, 3, 0}, {0, 0, 2}};
  CHECK(balanced_accuracy(diag) == 1.0);
  const ConfusionMatrix recalls{{4, 0, 0}, {1, 1, 0}, {0, 1, 3}};
  CHECK(balanced_accuracy(recalls) == doctest::Approx(0.75));
  const std::vector<int> truth{0, 1, 2, 3, 3};
  const std::vector<int> pred(5, 2);
  CHECK(balanced_accuracy(confusion_matrix(truth, pred, 4)) == doctest::Approx(0.25));
  const ConfusionMatrix hole{{1, 0}, {0, 0}};
  CHECK_THROWS_AS(balanced_accuracy(hole), hessl::Error);
  const auto m = evaluate(recalls);
  CHECK(m.accuracy == doctest::Approx(8.0 / 10.0));
  CHECK(m.per_class[1].precision == doctest::Approx(0.5));
  CHECK(m.per_class[2].support == 4);
}

TEST_CASE("annotation and manifest files round trip") {
  AnnotationFile a{"slide-7", 100, 50, {rect("tumor", 1, 2, 30, 40)}};
  const auto back = parse_annotations(annotations_to_json(a));
  CHECK(back.slide_id == "slide-7");
  REQUIRE(back.polygons.size() == 1);
  CHECK(back.polygons[0].points[2].x == 30);
  CHECK_THROWS_AS(parse_annotations("{\"slide_id\": 1}"), hessl::Error);

  DatasetManifest m;
  m.classes = {"a", "b"};
  m.grid = {64, 32, 16};
  m.slides = {{"s1", "s1.png", "s1.json", "", Split::kTrainLabeled}, {"s2", "s2.png", "", "s2.basis.json", Split::kTest}};
  const auto mb = parse_manifest(manifest_to_json(m));
  CHECK(mb.grid.unlabeled_stride == 16);
  CHECK(mb.slides[1].split == Split::kTest);
  CHECK(mb.slides[1].basis == "s2.basis.json");
  CHECK(manifest_to_json(mb) == manifest_to_json(m));
  m.slides.push_back({"s1", "x.png", "", "", Split::kVal});
  CHECK_THROWS_AS(parse_manifest(manifest_to_json(m)), hessl::Error);
}
