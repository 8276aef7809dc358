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

#ifndef HESSL_STAIN_MODEL_HPP
#define HESSL_STAIN_MODEL_HPP

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "hessl/image.hpp"

namespace hessl::stain_model {

using Vec3 = std::array<double, 3>;
/// Row-major 3x3.
using Mat3 = std::array<double, 9>;

struct StainParams {
  double outlier_fraction = 0.01;
  double min_od_norm = 0.1;
  double intensity_floor = 1.0;
  Rgb i0{255.0, 255.0, 255.0};
  std::uint64_t seed = 0;
  /// Fit the plane to the mean-centred covariance instead of the raw
  /// second moment. Off by default: stains mix linearly, not affinely.
  bool centered = false;
  std::size_t max_pixels = 2'000'000;
  std::size_t min_pixels = 100;

  bool operator==(const StainParams&) const = default;
};

/// Per-slide stain directions and the OD-space change of basis between RGB
/// and (H, E, residual) coordinates.
struct StainBasis {
  std::string slide_id;
  Vec3 v_h{};
  Vec3 v_e{};
  Vec3 v_residual{};
  /// Columns are [v_h, v_e, v_residual].
  Mat3 mat_heres_to_rgb_od{};
  Mat3 mat_rgb_to_heres_od{};
  /// 99th-percentile raw concentrations of the source slide; 0 until filled.
  double norm_h = 0.0;
  double norm_e = 0.0;
  StainParams params;

  /// Checks the unit-norm, inverse, collinearity and positive-norm
  /// invariants; throws kInvalidBasis.
  void validate() const;

  std::string to_json() const;
  static StainBasis from_json(const std::string& text);
  bool operator==(const StainBasis&) const = default;
};

struct PlaneProjection {
  Vec3 basis_x{};
  Vec3 basis_y{};
  Vec3 residual{};
  /// Eigenvalues of the fitted moment matrix, non-increasing.
  Vec3 eigenvalues{};
  /// Plane coordinates and 3D OD norm of every retained pixel.
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> norms;
};

struct StainVectors {
  Vec3 v_h{};
  Vec3 v_e{};
  /// Angles on the oriented plane; theta_h <= theta_e.
  double theta_h = 0.0;
  double theta_e = 0.0;
  Vec3 basis_x{};
  Vec3 basis_y{};
};

struct SymmetricEigen {
  Vec3 values{};
  /// vectors[i] pairs with values[i]; unit length.
  std::array<Vec3, 3> vectors{};
};

/// Cyclic Jacobi on a symmetric 3x3 matrix, eigenvalues sorted descending.
SymmetricEigen eigen_symmetric(const Mat3& m);

Mat3 invert(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);
Vec3 mat_vec(const Mat3& m, const Vec3& v);
Vec3 normalized(const Vec3& v);
Vec3 cross(const Vec3& a, const Vec3& b);
double dot(const Vec3& a, const Vec3& b);
/// Angle between two directions, degrees.
double angle_deg(const Vec3& a, const Vec3& b);

/// Fit the OD plane from pixels whose full 3D OD norm is at least
/// min_od_norm. Fewer than min_pixels survivors is kInsufficientTissue.
PlaneProjection estimate_plane(std::span<const Rgb> od_pixels, double min_od_norm, bool centered = false,
                               const std::string& slide_id = {}, std::size_t min_pixels = 100);
PlaneProjection estimate_plane(const OdImage& od, double min_od_norm, bool centered = false,
                               const std::string& slide_id = {});

/// Angle percentiles at outlier_fraction and 1 - outlier_fraction. The
/// extreme with the larger red OD is hematoxylin.
StainVectors extract_stain_vectors(const PlaneProjection& proj, double outlier_fraction = 0.01,
                                   double min_od_norm = 0.1, const std::string& slide_id = {});

/// Residual is the normalized cross product (or the hint, if given),
/// pointing toward the positive octant. Norms are left at zero.
StainBasis build_basis(const Vec3& v_h, const Vec3& v_e, const std::optional<Vec3>& v_residual_hint = std::nullopt);

/// Full estimation for one slide: subsample, OD, plane, stain vectors,
/// basis, then the 99th-percentile concentration norms.
StainBasis estimate_basis_for_slide(const RgbImage& img, const StainParams& params, const std::string& slide_id);

/// Thread-safe map from slide id to basis: shared reads, exclusive writes.
class BasisCache {
 public:
  std::shared_ptr<const StainBasis> find(const std::string& slide_id) const;
  void insert(StainBasis basis);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const StainBasis>> entries_;
};

}  // namespace hessl::stain_model

#endif  // HESSL_STAIN_MODEL_HPP
