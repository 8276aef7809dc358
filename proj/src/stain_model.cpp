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

#include "hessl/stain_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "hessl/od_color.hpp"
#include "hessl/rng.hpp"
#include "hessl/separation.hpp"

namespace hessl::stain_model {

namespace {

std::string slide_context(const std::string& slide_id) {
  return slide_id.empty() ? std::string("slide <unnamed>") : "slide '" + slide_id + "'";
}

// Sign convention for otherwise unoriented directions: component sum >= 0,
// with the largest-magnitude component breaking an exact zero sum.
Vec3 toward_positive(Vec3 v) {
  const double s = v[0] + v[1] + v[2];
  int big = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[big])) big = i;
  if (s < 0.0 || (s == 0.0 && v[big] < 0.0))
    for (double& c : v) c = -c;
  return v;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_array(const double* v, int n) {
  std::string s = "[";
  for (int i = 0; i < n; ++i) {
    if (i) s += ", ";
    s += fmt17(v[i]);
  }
  return s + "]";
}

}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0)) fail(ErrorKind::kInvalidInput, "cannot normalize a zero vector");
  return {v[0] / n, v[1] / n, v[2] / n};
}

double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(dot(normalized(a), normalized(b)), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return r;
}

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 invert(const Mat3& m) {
  const double c00 = m[4] * m[8] - m[5] * m[7];
  const double c01 = m[5] * m[6] - m[3] * m[8];
  const double c02 = m[3] * m[7] - m[4] * m[6];
  const double det = m[0] * c00 + m[1] * c01 + m[2] * c02;
  if (!(std::abs(det) > 1e-12)) fail(ErrorKind::kConditioning, "matrix is singular");
  const double inv = 1.0 / det;
  return {c00 * inv,
          (m[2] * m[7] - m[1] * m[8]) * inv,
          (m[1] * m[5] - m[2] * m[4]) * inv,
          c01 * inv,
          (m[0] * m[8] - m[2] * m[6]) * inv,
          (m[2] * m[3] - m[0] * m[5]) * inv,
          c02 * inv,
          (m[1] * m[6] - m[0] * m[7]) * inv,
          (m[0] * m[4] - m[1] * m[3]) * inv};
}

SymmetricEigen eigen_symmetric(const Mat3& m) {
  double a[3][3];
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] = 0.5 * (m[3 * i + j] + m[3 * j + i]);

  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
    if (off <= 1e-34 * diag || off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] > a[j][j] || (a[i][i] == a[j][j] && i < j); });
  SymmetricEigen out;
  for (int r = 0; r < 3; ++r) {
    const int i = order[r];
    out.values[r] = a[i][i];
    out.vectors[r] = normalized({v[0][i], v[1][i], v[2][i]});
  }
  return out;
}

PlaneProjection estimate_plane(std::span<const Rgb> od_pixels, double min_od_norm, bool centered,
                               const std::string& slide_id, std::size_t min_pixels) {
  std::vector<std::size_t> kept;
  kept.reserve(od_pixels.size());
  for (std::size_t i = 0; i < od_pixels.size(); ++i)
    if (od_color::od_norm(od_pixels[i]) >= min_od_norm) kept.push_back(i);
  if (kept.size() < min_pixels)
    fail(ErrorKind::kInsufficientTissue, slide_context(slide_id) + ": " + std::to_string(kept.size()) +
                                             " foreground pixels with OD norm >= " + std::to_string(min_od_norm) +
                                             ", need " + std::to_string(min_pixels));

  Vec3 mean{};
  for (std::size_t i : kept)
    for (int c = 0; c < 3; ++c) mean[c] += od_pixels[i][c];
  for (double& c : mean) c /= static_cast<double>(kept.size());

  Mat3 moment{};
  for (std::size_t i : kept) {
    Vec3 p = od_pixels[i];
    if (centered)
      for (int c = 0; c < 3; ++c) p[c] -= mean[c];
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) moment[3 * r + c] += p[r] * p[c];
  }
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) {
      moment[3 * r + c] /= static_cast<double>(kept.size());
      moment[3 * c + r] = moment[3 * r + c];
    }

  const SymmetricEigen eig = eigen_symmetric(moment);
  PlaneProjection proj;
  proj.eigenvalues = eig.values;
  proj.basis_x = eig.vectors[0];
  proj.basis_y = eig.vectors[1];
  proj.residual = toward_positive(eig.vectors[2]);

  if (dot(mean, proj.basis_x) < 0.0)
    for (double& c : proj.basis_x) c = -c;
  // Provisional; extract_stain_vectors fixes the final y orientation.
  int big = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(proj.basis_y[i]) > std::abs(proj.basis_y[big])) big = i;
  if (proj.basis_y[big] < 0.0)
    for (double& c : proj.basis_y) c = -c;

  proj.xs.reserve(kept.size());
  proj.ys.reserve(kept.size());
  proj.norms.reserve(kept.size());
  for (std::size_t i : kept) {
    proj.xs.push_back(dot(od_pixels[i], proj.basis_x));
    proj.ys.push_back(dot(od_pixels[i], proj.basis_y));
    proj.norms.push_back(od_color::od_norm(od_pixels[i]));
  }
  return proj;
}

PlaneProjection estimate_plane(const OdImage& od, double min_od_norm, bool centered, const std::string& slide_id) {
  std::vector<Rgb> pool(od.pixel_count());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = od.pixel(i);
  return estimate_plane(pool, min_od_norm, centered, slide_id);
}

StainVectors extract_stain_vectors(const PlaneProjection& proj, double outlier_fraction, double min_od_norm,
                                   const std::string& slide_id) {
  if (!(outlier_fraction > 0.0 && outlier_fraction < 0.5))
    fail(ErrorKind::kInvalidInput, "outlier fraction must lie in (0, 0.5)");

  std::vector<std::pair<double, std::size_t>> angles;
  angles.reserve(proj.xs.size());
  for (std::size_t i = 0; i < proj.xs.size(); ++i)
    if (proj.norms[i] >= min_od_norm) angles.emplace_back(std::atan2(proj.ys[i], proj.xs[i]), i);
  if (angles.size() < 2)
    fail(ErrorKind::kInsufficientTissue, slide_context(slide_id) + ": no pixels left for stain-vector estimation");

  const double last = static_cast<double>(angles.size() - 1);
  const auto k_lo = static_cast<std::ptrdiff_t>(std::llround(outlier_fraction * last));
  const auto k_hi = static_cast<std::ptrdiff_t>(std::llround((1.0 - outlier_fraction) * last));
  std::nth_element(angles.begin(), angles.begin() + k_lo, angles.end());
  const double theta_lo = angles[k_lo].first;
  std::nth_element(angles.begin(), angles.begin() + k_hi, angles.end());
  const double theta_hi = angles[k_hi].first;

  const double spread_deg = (theta_hi - theta_lo) * 180.0 / std::numbers::pi;
  if (spread_deg < 1.0)
    fail(ErrorKind::kDegenerateStain, slide_context(slide_id) + ": stain angles span only " +
                                          std::to_string(spread_deg) + " degrees; single-stain slide?");

  auto direction = [&](double theta) {
    Vec3 v;
    for (int c = 0; c < 3; ++c) v[c] = std::cos(theta) * proj.basis_x[c] + std::sin(theta) * proj.basis_y[c];
    return normalized(v);
  };
  const Vec3 v_lo = direction(theta_lo);
  const Vec3 v_hi = direction(theta_hi);

  StainVectors out;
  out.basis_x = proj.basis_x;
  out.basis_y = proj.basis_y;
  // Hematoxylin absorbs red light most strongly.
  if (v_lo[0] >= v_hi[0]) {
    out.v_h = v_lo;
    out.v_e = v_hi;
    out.theta_h = theta_lo;
    out.theta_e = theta_hi;
  } else {
    // Flip the y axis so hematoxylin keeps the lower angle.
    out.v_h = v_hi;
    out.v_e = v_lo;
    out.theta_h = -theta_hi;
    out.theta_e = -theta_lo;
    for (double& c : out.basis_y) c = -c;
  }
  return out;
}

StainBasis build_basis(const Vec3& v_h_in, const Vec3& v_e_in, const std::optional<Vec3>& v_residual_hint) {
  const Vec3 v_h = normalized(v_h_in);
  const Vec3 v_e = normalized(v_e_in);
  if (std::abs(dot(v_h, v_e)) > 1.0 - 1e-6)
    fail(ErrorKind::kConditioning, "hematoxylin and eosin vectors are (nearly) collinear");

  Vec3 residual = normalized(cross(v_h, v_e));
  if (v_residual_hint) {
    const Vec3 hint = normalized(*v_residual_hint);
    if (dot(hint, residual) < 0.0)
      for (double& c : residual) c = -c;
  } else {
    residual = toward_positive(residual);
  }

  StainBasis b;
  b.v_h = v_h;
  b.v_e = v_e;
  b.v_residual = residual;
  for (int r = 0; r < 3; ++r) {
    b.mat_heres_to_rgb_od[3 * r + 0] = v_h[r];
    b.mat_heres_to_rgb_od[3 * r + 1] = v_e[r];
    b.mat_heres_to_rgb_od[3 * r + 2] = residual[r];
  }
  b.mat_rgb_to_heres_od = invert(b.mat_heres_to_rgb_od);
  const Mat3 id = multiply(b.mat_heres_to_rgb_od, b.mat_rgb_to_heres_od);
  for (int i = 0; i < 9; ++i)
    if (std::abs(id[i] - (i % 4 == 0 ? 1.0 : 0.0)) > 1e-8)
      fail(ErrorKind::kConditioning, "stain matrix inverse is inaccurate");
  return b;
}

StainBasis estimate_basis_for_slide(const RgbImage& img, const StainParams& params, const std::string& slide_id) {
  if (!(params.outlier_fraction > 0.0 && params.outlier_fraction < 0.5))
    fail(ErrorKind::kInvalidInput, "outlier fraction must lie in (0, 0.5)");
  if (!(params.min_od_norm >= 0.0)) fail(ErrorKind::kInvalidInput, "min OD norm must be non-negative");
  if (params.max_pixels < params.min_pixels) fail(ErrorKind::kInvalidInput, "max_pixels below min_pixels");

  const std::size_t n = img.pixel_count();
  std::vector<std::size_t> picked;
  if (n > params.max_pixels) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    Stream rng = make_stream(params.seed, {0x5354414Eull /* "STAN" */});
    for (std::size_t i = 0; i < params.max_pixels; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    picked.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(params.max_pixels));
    std::sort(picked.begin(), picked.end());
  } else {
    picked.resize(n);
    std::iota(picked.begin(), picked.end(), std::size_t{0});
  }

  std::vector<Rgb> pool;
  pool.reserve(picked.size());
  for (std::size_t i : picked) pool.push_back(od_color::pixel_to_od(img.pixel(i), params.i0, params.intensity_floor));

  const PlaneProjection proj =
      estimate_plane(pool, params.min_od_norm, params.centered, slide_id, params.min_pixels);
  const StainVectors sv = extract_stain_vectors(proj, params.outlier_fraction, params.min_od_norm, slide_id);
  StainBasis basis = build_basis(sv.v_h, sv.v_e, proj.residual);
  basis.slide_id = slide_id;
  basis.params = params;

  std::vector<double> raw_h(pool.size());
  std::vector<double> raw_e(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Vec3 a = mat_vec(basis.mat_rgb_to_heres_od, pool[i]);
    raw_h[i] = a[0];
    raw_e[i] = a[1];
  }
  basis.norm_h = separation::compute_norm(raw_h);
  basis.norm_e = separation::compute_norm(raw_e);
  if (!(basis.norm_h > 0.0) || !(basis.norm_e > 0.0))
    fail(ErrorKind::kInsufficientTissue,
         slide_context(slide_id) + ": 99th-percentile stain concentration is not positive");
  return basis;
}

void StainBasis::validate() const {
  auto bad = [&](const std::string& why) { fail(ErrorKind::kInvalidBasis, "basis for " + slide_context(slide_id) + ": " + why); };
  for (const Vec3* v : {&v_h, &v_e, &v_residual})
    if (std::abs(std::sqrt(dot(*v, *v)) - 1.0) > 1e-10) bad("stain vector is not unit length");
  if (std::abs(dot(v_h, v_e)) >= 1.0 - 1e-6) bad("stain vectors are collinear");
  const Mat3 id = multiply(mat_heres_to_rgb_od, mat_rgb_to_heres_od);
  for (int i = 0; i < 9; ++i)
    if (std::abs(id[i] - (i % 4 == 0 ? 1.0 : 0.0)) > 1e-8) bad("matrices are not mutually inverse");
  if (!(norm_h > 0.0) || !(norm_e > 0.0)) bad("normalization constants must be positive");
}

std::string StainBasis::to_json() const {
  std::ostringstream os;
  os << "{\n"
     << "  \"slide_id\": " << nlohmann::json(slide_id).dump() << ",\n"
     << "  \"v_h\": " << fmt_array(v_h.data(), 3) << ",\n"
     << "  \"v_e\": " << fmt_array(v_e.data(), 3) << ",\n"
     << "  \"v_residual\": " << fmt_array(v_residual.data(), 3) << ",\n"
     << "  \"mat_heres_to_rgb_od\": " << fmt_array(mat_heres_to_rgb_od.data(), 9) << ",\n"
     << "  \"mat_rgb_to_heres_od\": " << fmt_array(mat_rgb_to_heres_od.data(), 9) << ",\n"
     << "  \"norm_h\": " << fmt17(norm_h) << ",\n"
     << "  \"norm_e\": " << fmt17(norm_e) << ",\n"
     << "  \"params\": {\n"
     << "    \"outlier_fraction\": " << fmt17(params.outlier_fraction) << ",\n"
     << "    \"min_od_norm\": " << fmt17(params.min_od_norm) << ",\n"
     << "    \"intensity_floor\": " << fmt17(params.intensity_floor) << ",\n"
     << "    \"i0\": " << fmt_array(params.i0.data(), 3) << ",\n"
     << "    \"seed\": " << params.seed << ",\n"
     << "    \"centered\": " << (params.centered ? "true" : "false") << ",\n"
     << "    \"max_pixels\": " << params.max_pixels << ",\n"
     << "    \"min_pixels\": " << params.min_pixels << "\n"
     << "  }\n"
     << "}\n";
  return os.str();
}

StainBasis StainBasis::from_json(const std::string& text) {
  StainBasis b;
  try {
    const auto j = nlohmann::json::parse(text);
    auto read = [&](const char* key, double* out, std::size_t n) {
      const auto& arr = j.at(key);
      if (!arr.is_array() || arr.size() != n)
        fail(ErrorKind::kInvalidBasis, std::string("basis field '") + key + "' has wrong length");
      for (std::size_t i = 0; i < n; ++i) out[i] = arr[i].get<double>();
    };
    b.slide_id = j.at("slide_id").get<std::string>();
    read("v_h", b.v_h.data(), 3);
    read("v_e", b.v_e.data(), 3);
    read("v_residual", b.v_residual.data(), 3);
    read("mat_heres_to_rgb_od", b.mat_heres_to_rgb_od.data(), 9);
    read("mat_rgb_to_heres_od", b.mat_rgb_to_heres_od.data(), 9);
    b.norm_h = j.at("norm_h").get<double>();
    b.norm_e = j.at("norm_e").get<double>();
    const auto& p = j.at("params");
    b.params.outlier_fraction = p.at("outlier_fraction").get<double>();
    b.params.min_od_norm = p.at("min_od_norm").get<double>();
    b.params.intensity_floor = p.at("intensity_floor").get<double>();
    for (int c = 0; c < 3; ++c) b.params.i0[c] = p.at("i0").at(c).get<double>();
    b.params.seed = p.at("seed").get<std::uint64_t>();
    b.params.centered = p.value("centered", b.params.centered);
    b.params.max_pixels = p.value("max_pixels", b.params.max_pixels);
    b.params.min_pixels = p.value("min_pixels", b.params.min_pixels);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidBasis, std::string("malformed basis JSON: ") + e.what());
  }
  b.validate();
  return b;
}

std::shared_ptr<const StainBasis> BasisCache::find(const std::string& slide_id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(slide_id);
  return it == entries_.end() ? nullptr : it->second;
}

void BasisCache::insert(StainBasis basis) {
  auto ptr = std::make_shared<const StainBasis>(std::move(basis));
  std::unique_lock lock(mutex_);
  entries_[ptr->slide_id] = std::move(ptr);
}

std::size_t BasisCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace hessl::stain_model
