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

#include "hessl/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"
#include "hessl/od_color.hpp"
#include "hessl/rng.hpp"

namespace hessl::datapipe {

namespace {

double orient(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(Point a, Point b, Point p) {
  return orient(a, b, p) == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool segments_touch(Point p1, Point p2, Point q1, Point q2) {
  const int d1 = sign(orient(q1, q2, p1));
  const int d2 = sign(orient(q1, q2, p2));
  const int d3 = sign(orient(p1, p2, q1));
  const int d4 = sign(orient(p1, p2, q2));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

bool rect_meets_polygon(double x0, double y0, double x1, double y1, std::span<const Point> poly) {
  for (const Point& v : poly)
    if (v.x >= x0 && v.x <= x1 && v.y >= y0 && v.y <= y1) return true;
  const Point corners[4] = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  for (const Point& c : corners)
    if (point_in_polygon(poly, c)) return true;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point a = poly[i];
    const Point b = poly[(i + 1) % poly.size()];
    for (int k = 0; k < 4; ++k)
      if (segments_touch(a, b, corners[k], corners[(k + 1) % 4])) return true;
  }
  return false;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrainLabeled;
  if (s == "train_unlabeled") return Split::kTrainUnlabeled;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  fail(ErrorKind::kConfiguration, "unknown split '" + s + "'");
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrainLabeled: return "train";
    case Split::kTrainUnlabeled: return "train_unlabeled";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

bool point_in_polygon(std::span<const Point> polygon, Point p) {
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i)
    if (on_segment(polygon[i], polygon[(i + 1) % n], p)) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = polygon[i];
    const Point b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool is_simple(std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  double area = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    if (a.x == b.x && a.y == b.y) return false;
    area += a.x * b.y - b.x * a.y;
  }
  if (area == 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point c = polygon[j];
      const Point d = polygon[(j + 1) % n];
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (!adjacent) {
        if (segments_touch(a, b, c, d)) return false;
        continue;
      }
      // Adjacent edges share one vertex; they must not fold back onto each other.
      const Point shared = j == i + 1 ? b : a;
      const Point u = j == i + 1 ? a : b;
      const Point w = j == i + 1 ? d : c;
      if (orient(shared, u, w) == 0.0 && (u.x - shared.x) * (w.x - shared.x) + (u.y - shared.y) * (w.y - shared.y) > 0.0)
        return false;
    }
  }
  return true;
}

void validate_polygons(std::span<const PolygonAnnotation> polygons) {
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    if (polygons[i].points.size() < 3)
      fail(ErrorKind::kAnnotation, "polygon " + std::to_string(i) + " has fewer than 3 vertices");
    if (!is_simple(polygons[i].points))
      fail(ErrorKind::kAnnotation, "polygon " + std::to_string(i) + " is degenerate or self-intersecting");
  }
}

ExtractedTiles extract_tiles(int width, int height, std::span<const PolygonAnnotation> polygons,
                             const std::map<std::string, int>& class_index, const TileGrid& grid,
                             const std::string& slide_id) {
  if (grid.tile_size < 1 || grid.stride < 1 || grid.unlabeled_stride < 0)
    fail(ErrorKind::kInvalidInput, "tile size and stride must be positive");
  validate_polygons(polygons);
  for (std::size_t i = 0; i < polygons.size(); ++i)
    if (!class_index.count(polygons[i].label))
      fail(ErrorKind::kAnnotation, "polygon " + std::to_string(i) + " has unknown label '" + polygons[i].label + "'");

  const int s = grid.tile_size;
  ExtractedTiles out;
  for (int y = 0; y + s <= height; y += grid.stride)
    for (int x = 0; x + s <= width; x += grid.stride) {
      const Point probes[5] = {{double(x), double(y)}, {double(x + s), double(y)}, {double(x + s), double(y + s)},
                               {double(x), double(y + s)}, {x + 0.5 * s, y + 0.5 * s}};
      int hits = 0;
      std::size_t which = 0;
      for (std::size_t p = 0; p < polygons.size(); ++p) {
        bool all = true;
        for (const Point& q : probes) all = all && point_in_polygon(polygons[p].points, q);
        if (all) {
          ++hits;
          which = p;
        }
      }
      if (hits == 1) {
        TileSample t{slide_id, x, y, s, class_index.at(polygons[which].label), polygons[which].label, Split::kTrainLabeled};
        out.labeled.push_back(std::move(t));
      }
    }

  const int ustride = grid.unlabeled_stride > 0 ? grid.unlabeled_stride : grid.stride;
  for (int y = 0; y + s <= height; y += ustride)
    for (int x = 0; x + s <= width; x += ustride) {
      bool clear = true;
      for (const auto& poly : polygons)
        if (rect_meets_polygon(x, y, x + s, y + s, poly.points)) {
          clear = false;
          break;
        }
      if (clear) out.unlabeled.push_back({slide_id, x, y, s, std::nullopt, {}, Split::kTrainUnlabeled});
    }
  return out;
}

double tissue_fraction(const RgbImage& tile, double od_threshold, double intensity_floor) {
  std::size_t tissue = 0;
  for (std::size_t i = 0; i < tile.pixel_count(); ++i)
    if (od_color::od_norm(od_color::pixel_to_od(tile.pixel(i), tile.i0, intensity_floor)) >= od_threshold) ++tissue;
  return static_cast<double>(tissue) / static_cast<double>(tile.pixel_count());
}

bool foreground_filter(const RgbImage& tile, double od_threshold, double min_tissue_fraction, double intensity_floor) {
  if (!(od_threshold >= 0.0) || !(min_tissue_fraction >= 0.0 && min_tissue_fraction <= 1.0))
    fail(ErrorKind::kInvalidInput, "foreground thresholds out of range");
  return tissue_fraction(tile, od_threshold, intensity_floor) >= min_tissue_fraction;
}

// ---- sampler ------------------------------------------------------------------

int BatchComposition::labeled_count() const {
  return std::accumulate(per_class_labeled.begin(), per_class_labeled.end(), 0);
}

BatchComposition BatchComposition::uniform(int num_classes, int per_class, int unlabeled) {
  return {std::vector<int>(static_cast<std::size_t>(num_classes), per_class), unlabeled};
}

BalancedSampler::BalancedSampler(std::vector<std::vector<std::size_t>> class_pools,
                                 std::vector<std::size_t> unlabeled_pool, BatchComposition composition,
                                 std::uint64_t seed, std::vector<std::string> class_names)
    : comp_(std::move(composition)), seed_(seed) {
  if (class_pools.size() != comp_.per_class_labeled.size())
    fail(ErrorKind::kConfiguration, "batch composition has " + std::to_string(comp_.per_class_labeled.size()) +
                                        " classes but " + std::to_string(class_pools.size()) + " pools were given");
  for (std::size_t c = 0; c < class_pools.size(); ++c) {
    if (comp_.per_class_labeled[c] < 0) fail(ErrorKind::kConfiguration, "negative per-class count");
    if (class_pools[c].empty() && comp_.per_class_labeled[c] > 0) {
      const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
      fail(ErrorKind::kConfiguration, "labeled pool for class '" + name + "' is empty");
    }
    Pool pool;
    pool.ids = std::move(class_pools[c]);
    pool.stream_id = c;
    classes_.push_back(std::move(pool));
  }
  if (comp_.unlabeled_count < 0) fail(ErrorKind::kConfiguration, "negative unlabeled count");
  if (comp_.unlabeled_count > 0 && unlabeled_pool.empty())
    fail(ErrorKind::kConfiguration, "unlabeled pool is empty but the batch asks for unlabeled samples");
  unlabeled_.ids = std::move(unlabeled_pool);
  unlabeled_.stream_id = 0xFFFFull;
}

std::size_t BalancedSampler::draw(Pool& pool, std::uint64_t index) {
  const std::uint64_t n = pool.ids.size();
  const std::uint64_t pass = index / n;
  if (pass != pool.cached_pass) {
    pool.order.resize(n);
    std::iota(pool.order.begin(), pool.order.end(), std::size_t{0});
    Stream rng = make_stream(seed_, {0x53414D50ull /* "SAMP" */, pool.stream_id, pass});
    for (std::uint64_t i = n; i > 1; --i) std::swap(pool.order[i - 1], pool.order[rng.below(i)]);
    pool.cached_pass = pass;
  }
  return pool.ids[pool.order[index % n]];
}

BatchIndices BalancedSampler::batch(std::uint64_t iteration) {
  BatchIndices b;
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    const auto k = static_cast<std::uint64_t>(comp_.per_class_labeled[c]);
    for (std::uint64_t j = 0; j < k; ++j) b.labeled.emplace_back(static_cast<int>(c), draw(classes_[c], iteration * k + j));
  }
  const auto u = static_cast<std::uint64_t>(comp_.unlabeled_count);
  for (std::uint64_t j = 0; j < u; ++j) b.unlabeled.push_back(draw(unlabeled_, iteration * u + j));
  return b;
}

// ---- metrics ------------------------------------------------------------------

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) fail(ErrorKind::kEvaluation, "truth and prediction counts differ");
  ConfusionMatrix m(static_cast<std::size_t>(num_classes), std::vector<long long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes)
      fail(ErrorKind::kEvaluation, "class index out of range");
    ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return m;
}

double balanced_accuracy(const ConfusionMatrix& confusion) {
  if (confusion.empty()) fail(ErrorKind::kEvaluation, "empty confusion matrix");
  double sum = 0.0;
  for (std::size_t c = 0; c < confusion.size(); ++c) {
    const long long row = std::accumulate(confusion[c].begin(), confusion[c].end(), 0LL);
    if (row == 0) fail(ErrorKind::kEvaluation, "class " + std::to_string(c) + " has no samples");
    sum += static_cast<double>(confusion[c][c]) / static_cast<double>(row);
  }
  return sum / static_cast<double>(confusion.size());
}

Metrics evaluate(const ConfusionMatrix& confusion) {
  Metrics m;
  m.confusion = confusion;
  m.balanced_accuracy = balanced_accuracy(confusion);
  const std::size_t n = confusion.size();
  long long total = 0, correct = 0;
  for (std::size_t c = 0; c < n; ++c) {
    ClassMetrics cm;
    long long col = 0;
    for (std::size_t r = 0; r < n; ++r) col += confusion[r][c];
    cm.support = std::accumulate(confusion[c].begin(), confusion[c].end(), 0LL);
    const double tp = static_cast<double>(confusion[c][c]);
    cm.recall = tp / static_cast<double>(cm.support);
    cm.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    cm.f_score = cm.recall + cm.precision > 0 ? 2.0 * cm.recall * cm.precision / (cm.recall + cm.precision) : 0.0;
    m.per_class.push_back(cm);
    total += cm.support;
    correct += confusion[c][c];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

// ---- files --------------------------------------------------------------------

AnnotationFile parse_annotations(const std::string& json_text) {
  AnnotationFile a;
  try {
    const auto j = nlohmann::json::parse(json_text);
    a.slide_id = j.at("slide_id").get<std::string>();
    a.width = j.at("width").get<int>();
    a.height = j.at("height").get<int>();
    const auto& polys = j.at("polygons");
    for (std::size_t i = 0; i < polys.size(); ++i) {
      PolygonAnnotation p;
      p.label = polys[i].at("label").get<std::string>();
      for (const auto& pt : polys[i].at("points")) {
        if (!pt.is_array() || pt.size() != 2)
          fail(ErrorKind::kAnnotation, "polygon " + std::to_string(i) + " has a malformed vertex");
        p.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
      a.polygons.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kAnnotation, std::string("malformed annotation JSON: ") + e.what());
  }
  if (a.width < 1 || a.height < 1) fail(ErrorKind::kAnnotation, "annotation width/height must be positive");
  validate_polygons(a.polygons);
  return a;
}

std::string annotations_to_json(const AnnotationFile& a) {
  nlohmann::ordered_json j;
  j["slide_id"] = a.slide_id;
  j["width"] = a.width;
  j["height"] = a.height;
  j["polygons"] = nlohmann::ordered_json::array();
  for (const auto& p : a.polygons) {
    nlohmann::ordered_json pj;
    pj["label"] = p.label;
    pj["points"] = nlohmann::ordered_json::array();
    for (const auto& pt : p.points) pj["points"].push_back({pt.x, pt.y});
    j["polygons"].push_back(pj);
  }
  return j.dump(2) + "\n";
}

std::map<std::string, int> DatasetManifest::class_index() const {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < classes.size(); ++i) m[classes[i]] = static_cast<int>(i);
  return m;
}

void DatasetManifest::check_no_leakage() const {
  std::set<std::string> seen;
  for (const auto& s : slides)
    if (!seen.insert(s.slide_id).second)
      fail(ErrorKind::kConfiguration, "slide '" + s.slide_id + "' is listed more than once; splits must be slide-level");
}

DatasetManifest parse_manifest(const std::string& json_text) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(json_text);
    m.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("tile")) {
      const auto& t = j.at("tile");
      m.grid.tile_size = t.value("size", m.grid.tile_size);
      m.grid.stride = t.value("stride", m.grid.stride);
      m.grid.unlabeled_stride = t.value("unlabeled_stride", m.grid.unlabeled_stride);
    }
    m.tissue_od = j.value("tissue_od", m.tissue_od);
    m.tissue_fraction = j.value("tissue_fraction", m.tissue_fraction);
    for (const auto& s : j.at("slides")) {
      SlideEntry e;
      e.slide_id = s.at("slide_id").get<std::string>();
      e.image = s.at("image").get<std::string>();
      e.annotations = s.value("annotations", std::string());
      e.basis = s.value("basis", std::string());
      e.split = parse_split(s.at("split").get<std::string>());
      m.slides.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfiguration, std::string("malformed dataset manifest: ") + e.what());
  }
  if (m.classes.size() < 2) fail(ErrorKind::kConfiguration, "manifest needs at least two classes");
  m.check_no_leakage();
  return m;
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["classes"] = m.classes;
  j["tile"] = {{"size", m.grid.tile_size}, {"stride", m.grid.stride}, {"unlabeled_stride", m.grid.unlabeled_stride}};
  j["tissue_od"] = m.tissue_od;
  j["tissue_fraction"] = m.tissue_fraction;
  j["slides"] = nlohmann::ordered_json::array();
  for (const auto& s : m.slides) {
    nlohmann::ordered_json e;
    e["slide_id"] = s.slide_id;
    e["image"] = s.image;
    if (!s.annotations.empty()) e["annotations"] = s.annotations;
    if (!s.basis.empty()) e["basis"] = s.basis;
    e["split"] = split_name(s.split);
    j["slides"].push_back(e);
  }
  return j.dump(2) + "\n";
}

}  // namespace hessl::datapipe
