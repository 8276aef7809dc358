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

#ifndef HESSL_DATAPIPE_HPP
#define HESSL_DATAPIPE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hessl/image.hpp"

namespace hessl::datapipe {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct PolygonAnnotation {
  std::string label;
  std::vector<Point> points;  // closed implicitly, >= 3 vertices
};

/// Even-odd ray casting; points on an edge or vertex count as inside.
bool point_in_polygon(std::span<const Point> polygon, Point p);
/// No two non-adjacent edges touch and no adjacent edges overlap.
bool is_simple(std::span<const Point> polygon);
/// Throws kAnnotation naming the first bad polygon's index.
void validate_polygons(std::span<const PolygonAnnotation> polygons);

enum class Split { kTrainLabeled, kTrainUnlabeled, kVal, kTest };
const char* split_name(Split s);

struct TileSample {
  std::string slide_id;
  int x = 0;
  int y = 0;
  int size = 400;
  std::optional<int> label;
  std::string label_name;
  Split split = Split::kTrainUnlabeled;
};

struct TileGrid {
  int tile_size = 400;
  int stride = 200;
  /// Grid step for tiles outside every polygon; 0 means use stride.
  int unlabeled_stride = 0;
};

struct ExtractedTiles {
  std::vector<TileSample> labeled;
  std::vector<TileSample> unlabeled;
};

/// Row-major grid positions with x + size <= width and y + size <= height.
/// A tile is labeled when its four corners and centre lie in exactly one
/// polygon; a tile that meets no polygon at all is an unlabeled candidate.
/// Labels not found in class_index are an annotation error.
ExtractedTiles extract_tiles(int width, int height, std::span<const PolygonAnnotation> polygons,
                             const std::map<std::string, int>& class_index, const TileGrid& grid,
                             const std::string& slide_id);

inline constexpr double kDefaultTissueOd = 0.15;
inline constexpr double kDefaultTissueFraction = 0.25;

double tissue_fraction(const RgbImage& tile, double od_threshold = kDefaultTissueOd, double intensity_floor = 1.0);
/// Keep iff the fraction of pixels with OD norm >= od_threshold is at
/// least min_tissue_fraction.
bool foreground_filter(const RgbImage& tile, double od_threshold = kDefaultTissueOd,
                       double min_tissue_fraction = kDefaultTissueFraction, double intensity_floor = 1.0);

struct BatchComposition {
  std::vector<int> per_class_labeled{8, 8, 8, 8};
  int unlabeled_count = 32;

  int labeled_count() const;
  int batch_size() const { return labeled_count() + unlabeled_count; }
  static BatchComposition uniform(int num_classes, int per_class, int unlabeled);
  bool operator==(const BatchComposition&) const = default;
};

struct BatchIndices {
  /// (class, sample id) in class order.
  std::vector<std::pair<int, std::size_t>> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Class-balanced sampler. Each pool is walked through a fresh seeded
/// permutation per pass, so small pools repeat across batches. Batch t is a
/// pure function of (seed, t): training can resume at any iteration.
class BalancedSampler {
 public:
  BalancedSampler(std::vector<std::vector<std::size_t>> class_pools, std::vector<std::size_t> unlabeled_pool,
                  BatchComposition composition, std::uint64_t seed, std::vector<std::string> class_names = {});

  BatchIndices batch(std::uint64_t iteration);
  const BatchComposition& composition() const noexcept { return comp_; }

 private:
  struct Pool {
    std::vector<std::size_t> ids;
    std::uint64_t stream_id = 0;
    std::uint64_t cached_pass = UINT64_MAX;
    std::vector<std::size_t> order;
  };
  std::size_t draw(Pool& pool, std::uint64_t index);

  std::vector<Pool> classes_;
  Pool unlabeled_;
  BatchComposition comp_;
  std::uint64_t seed_;
};

using ConfusionMatrix = std::vector<std::vector<long long>>;

struct ClassMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
  long long support = 0;
};

struct Metrics {
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int num_classes);
/// Mean per-class recall; an empty class row raises kEvaluation.
double balanced_accuracy(const ConfusionMatrix& confusion);
Metrics evaluate(const ConfusionMatrix& confusion);

struct AnnotationFile {
  std::string slide_id;
  int width = 0;
  int height = 0;
  std::vector<PolygonAnnotation> polygons;
};
AnnotationFile parse_annotations(const std::string& json_text);
std::string annotations_to_json(const AnnotationFile& a);

struct SlideEntry {
  std::string slide_id;
  std::string image;        // path, relative to the manifest directory
  std::string annotations;  // optional
  std::string basis;        // optional precomputed basis
  Split split = Split::kTrainLabeled;  // train slides contribute both pools
};

struct DatasetManifest {
  std::vector<std::string> classes;
  TileGrid grid;
  double tissue_od = kDefaultTissueOd;
  double tissue_fraction = kDefaultTissueFraction;
  std::vector<SlideEntry> slides;

  std::map<std::string, int> class_index() const;
  /// Throws kConfiguration if a slide id repeats (it would sit in two splits).
  void check_no_leakage() const;
};
DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& m);

}  // namespace hessl::datapipe

#endif  // HESSL_DATAPIPE_HPP
