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


#include <filesystem>
#include <fstream>
#include <regex>

#include "doctest.h"
#include "hessl/datapipe.hpp"
#include "hessl/image_io.hpp"
#include "hessl/separation.hpp"
#include "hessl/stain_model.hpp"
#include "hessl/synthetic.hpp"
#include "json.hpp"
#include "support/scratch.hpp"

using namespace hessl;
using testing::run_cli;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path two_stain_png(const fs::path& dir, int w, int h) {
  Stream rng = make_stream(3, {});
  const auto c = synthetic::uniform_concentrations(w, h, 1.0, 0.6, rng);
  const auto path = dir / "slide.png";
  io::write_png_rgb8(path.string(), synthetic::compose(c, synthetic::reference_stains()));
  return path;
}

void write_annotations(const fs::path& path, int w, int h, const std::vector<datapipe::PolygonAnnotation>& polys) {
  io::write_text(path.string(), datapipe::annotations_to_json({"slide", w, h, polys}));
}

}  // namespace

TEST_CASE("version and usage errors") {
  const auto v = run_cli("--version");
  CHECK(v.exit_code == 0);
  CHECK(v.output.find("0.1.0") != std::string::npos);
  CHECK(run_cli("stain-estimate").exit_code == 6);
  CHECK(run_cli("no-such-command").exit_code == 6);
}

TEST_CASE("stain-estimate: recovers the basis, is reproducible, refuses to overwrite") {
  const auto dir = testing::scratch_dir("cli_se");
  const auto img = two_stain_png(dir, 96, 96);
  const auto r1 = run_cli("--seed 1 stain-estimate --input " + q(img) + " --out " + q(dir / "a.json"));
  REQUIRE_MESSAGE(r1.exit_code == 0, r1.output);
  CHECK(run_cli("--seed 1 stain-estimate --input " + q(img) + " --out " + q(dir / "b.json")).exit_code == 0);
  CHECK(io::read_text((dir / "a.json").string()) == io::read_text((dir / "b.json").string()));
  CHECK(fs::exists(dir / "a.json.manifest.json"));

  const auto basis = stain_model::StainBasis::from_json(io::read_text((dir / "a.json").string()));
  const auto ref = synthetic::reference_stains();
  CHECK(stain_model::angle_deg(basis.v_h, ref.v_h) < 2.0);
  CHECK(stain_model::angle_deg(basis.v_e, ref.v_e) < 2.0);
  CHECK(basis.slide_id == "slide");

  const auto again = run_cli("--seed 1 stain-estimate --input " + q(img) + " --out " + q(dir / "a.json"));
  CHECK(again.exit_code != 0);
  CHECK(run_cli("--force --seed 1 stain-estimate --input " + q(img) + " --out " + q(dir / "a.json")).exit_code == 0);
}

TEST_CASE("stain-estimate on a blank image exits with insufficient tissue") {
  const auto dir = testing::scratch_dir("cli_blank");
  io::write_png_rgb8((dir / "blank.png").string(), RgbImage(64, 64));
  const auto r = run_cli("--json-errors --seed 1 stain-estimate --input " + q(dir / "blank.png") + " --out " +
                         q(dir / "b.json"));
  CHECK(r.exit_code == 2);
  const auto start = r.output.find('{');
  REQUIRE(start != std::string::npos);
  const auto j = nlohmann::json::parse(r.output.substr(start));
  CHECK(j["error"]["exit_code"] == 2);
  CHECK_FALSE(fs::exists(dir / "b.json"));
}

namespace {

double worst_error(const RgbImage& a, const RgbImage& b, double* mean = nullptr) {
  double worst = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = std::abs(a.pixels[i] - b.pixels[i]);
    worst = std::max(worst, d);
    sum += d;
  }
  if (mean) *mean = sum / static_cast<double>(a.pixels.size());
  return worst;
}

}  // namespace

TEST_CASE("separate: round trip, background, missing and mismatched bases") {
  const auto dir = testing::scratch_dir("cli_sep");
  const auto img = two_stain_png(dir, 64, 64);
  const RgbImage orig = io::read_image(img.string());

  // With the stains the image was composed from, only 8-bit quantization is lost.
  const auto ref = synthetic::reference_stains();
  auto truth = stain_model::build_basis(ref.v_h, ref.v_e);
  truth.slide_id = "slide";
  const auto raw = separation::separate_concentrations(orig, truth);
  truth.norm_h = separation::compute_norm(raw.h.data);
  truth.norm_e = separation::compute_norm(raw.e.data);
  io::write_text((dir / "truth.json").string(), truth.to_json());
  const auto rt = run_cli("--seed 1 separate --input " + q(img) + " --basis " + q(dir / "truth.json") +
                          " --out-h " + q(dir / "th.png") + " --out-e " + q(dir / "te.png") + " --reconstruct " +
                          q(dir / "trec.png"));
  REQUIRE_MESSAGE(rt.exit_code == 0, rt.output);
  CHECK(worst_error(orig, io::read_image((dir / "trec.png").string())) <= 1.0);

  REQUIRE(run_cli("--seed 1 stain-estimate --input " + q(img) + " --out " + q(dir / "basis.json")).exit_code == 0);
  const auto r = run_cli("--seed 1 separate --input " + q(img) + " --basis " + q(dir / "basis.json") + " --out-h " +
                         q(dir / "h.png") + " --out-e " + q(dir / "e.png") + " --reconstruct " + q(dir / "rec.png"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  double mean = 0.0;
  worst_error(orig, io::read_image((dir / "rec.png").string()), &mean);
  CHECK(mean < 1.0);

  const auto missing = run_cli("--seed 1 separate --input " + q(img) + " --basis " + q(dir / "nope.json") +
                               " --out-h " + q(dir / "h2.png") + " --out-e " + q(dir / "e2.png"));
  CHECK(missing.exit_code == 1);
  CHECK(missing.output.find("nope.json") != std::string::npos);

  const auto mismatch = run_cli("--seed 1 separate --input " + q(img) + " --basis " + q(dir / "basis.json") +
                                " --slide-id other --out-h " + q(dir / "h3.png") + " --out-e " + q(dir / "e3.png"));
  CHECK(mismatch.exit_code == 4);
  CHECK(run_cli("--seed 1 separate --allow-cross-basis --input " + q(img) + " --basis " + q(dir / "basis.json") +
                " --slide-id other --out-h " + q(dir / "h3.png") + " --out-e " + q(dir / "e3.png"))
            .exit_code == 0);

  io::write_png_rgb8((dir / "white.png").string(), RgbImage(16, 16));
  REQUIRE(run_cli("--seed 1 separate --allow-cross-basis --input " + q(dir / "white.png") + " --basis " +
                  q(dir / "basis.json") + " --out-h " + q(dir / "wh.png") + " --out-e " + q(dir / "we.png"))
              .exit_code == 0);
  for (const char* f : {"wh.png", "we.png"})
    for (auto v : io::read_png_gray16((dir / f).string()).data) CHECK(v == 0);
}

TEST_CASE("tile: grid counts, unlabeled-only and bad polygons") {
  const auto dir = testing::scratch_dir("cli_tile");
  const auto img = two_stain_png(dir, 800, 400);
  write_annotations(dir / "full.json", 800, 400, {{"tumor", {{0, 0}, {800, 0}, {800, 400}, {0, 400}}}});
  const auto r = run_cli("--seed 1 tile --image " + q(img) + " --annotations " + q(dir / "full.json") + " --out " +
                         q(dir / "tiles") + " --size 400 --stride 200");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("tumor: 3") != std::string::npos);
  CHECK(fs::exists(dir / "tiles" / "tumor" / "slide_200_0.png"));
  CHECK(fs::exists(dir / "tiles" / "index.json"));

  write_annotations(dir / "none.json", 800, 400, {});
  const auto u = run_cli("--seed 1 tile --image " + q(img) + " --annotations " + q(dir / "none.json") + " --classes tumor --out " +
                         q(dir / "tiles2") + " --size 400 --stride 200");
  REQUIRE_MESSAGE(u.exit_code == 0, u.output);
  CHECK(u.output.find("unlabeled: 3") != std::string::npos);

  io::write_text((dir / "bow.json").string(),
                 R"({"slide_id": "slide", "width": 800, "height": 400, "polygons": [)"
                 R"({"label": "tumor", "points": [[0,0],[400,400],[400,0],[0,400]]}]})");
  const auto b = run_cli("--seed 1 tile --image " + q(img) + " --annotations " + q(dir / "bow.json") + " --out " +
                         q(dir / "tiles3"));
  CHECK(b.exit_code == 5);
}

TEST_CASE("synth, train, eval and heatmap end to end") {
  const auto dir = testing::scratch_dir("cli_e2e");
  const auto s = run_cli("--seed 2 synth --out " + q(dir / "data") + "");
  REQUIRE_MESSAGE(s.exit_code == 0, s.output);
  std::string cfg = io::read_text((dir / "data" / "config.toml").string());
  cfg = std::regex_replace(cfg, std::regex("iterations_per_epoch = \\d+"), "iterations_per_epoch = 3");
  cfg = std::regex_replace(cfg, std::regex("max_epochs = \\d+"), "max_epochs = 2");
  io::write_text((dir / "data" / "config.toml").string(), cfg);

  const auto t = run_cli("--seed 2 train --no-plots --config " + q(dir / "data" / "config.toml") + " --out " + q(dir / "run"));
  REQUIRE_MESSAGE(t.exit_code == 0, t.output);
  for (const char* f : {"checkpoint.json", "best_model.json", "report.json", "run_manifest.json", "train_log.jsonl"})
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  const auto manifest = nlohmann::json::parse(io::read_text((dir / "run" / "run_manifest.json").string()));
  CHECK(manifest.contains("inputs"));

  const auto e = run_cli("eval --checkpoint " + q(dir / "run" / "best_model.json") + " --manifest " +
                         q(dir / "data" / "dataset.json") + " --split test --out " + q(dir / "metrics.json"));
  REQUIRE_MESSAGE(e.exit_code == 0, e.output);
  const auto m = nlohmann::json::parse(io::read_text((dir / "metrics.json").string()));
  CHECK(m["balanced_accuracy"].get<double>() >= 0.0);

  REQUIRE(run_cli("--seed 2 stain-estimate --input " + q(dir / "data" / "slide3.png") + " --out " +
                  q(dir / "slide3.basis.json"))
              .exit_code == 0);
  const auto h = run_cli("heatmap --checkpoint " + q(dir / "run" / "best_model.json") + " --image " +
                         q(dir / "data" / "slide3.png") + " --basis " + q(dir / "slide3.basis.json") +
                         " --tile-size 40 --stride 20 --out " + q(dir / "heat.png"));
  REQUIRE_MESSAGE(h.exit_code == 0, h.output);
  const auto png = io::decode_png((dir / "heat.png").string());
  CHECK(png.width == 320);
  CHECK(png.channels == 4);

  const auto resume = run_cli("--seed 2 train --resume --no-plots --config " + q(dir / "data" / "config.toml") +
                              " --out " + q(dir / "run"));
  CHECK_MESSAGE(resume.exit_code == 0, resume.output);
}
