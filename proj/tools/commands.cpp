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

#include "commands.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "hessl/config.hpp"
#include "hessl/datapipe.hpp"
#include "hessl/errors.hpp"
#include "hessl/heatmap.hpp"
#include "hessl/image_io.hpp"
#include "hessl/separation.hpp"
#include "hessl/stain_model.hpp"
#include "hessl/synthetic.hpp"
#include "hessl/trainer.hpp"
#include "hessl/version.hpp"
#include "json.hpp"
#include "run_manifest.hpp"

namespace hessl::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  bool json_errors = false;
  bool force = false;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::vector<std::string> argv;
};

std::uint64_t resolve_seed(const Globals& g) {
  if (g.seed) return *g.seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

void ensure_writable(const std::string& path, const Globals& g) {
  if (fs::exists(path) && !g.force) fail(ErrorKind::kIo, "refusing to overwrite '" + path + "' (pass --force)");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void prepare_dir(const std::string& dir, const Globals& g) {
  if (fs::exists(dir) && !fs::is_directory(dir)) fail(ErrorKind::kIo, "'" + dir + "' exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!g.force) fail(ErrorKind::kIo, "output directory '" + dir + "' is not empty (pass --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_manifest(const std::string& path, RunManifest m, const Globals& g) {
  m.arguments = g.argv;
  if (g.force && fs::exists(path)) fs::remove(path);
  io::write_text(path, m.to_json());
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

void report_error(const Globals& g, ErrorKind kind, const std::string& message) {
  if (g.json_errors) {
    json j = {{"error", {{"kind", kind_name(kind)}, {"exit_code", exit_code(kind)}, {"message", message}}}};
    std::cerr << j.dump() << std::endl;
  } else {
    std::cerr << "hessl: error [" << kind_name(kind) << "]: " << message << std::endl;
  }
}

// ---- stain-estimate ----------------------------------------------------------

struct StainEstimateArgs {
  std::string input, out, slide_id;
  double outlier_fraction = 0.01;
  double min_od_norm = 0.1;
  double intensity_floor = 1.0;
  bool centered = false;
};

int cmd_stain_estimate(const StainEstimateArgs& a, const Globals& g) {
  ensure_writable(a.out, g);
  ensure_writable(a.out + ".manifest.json", g);
  const RgbImage img = io::read_image(a.input);
  stain_model::StainParams p;
  p.outlier_fraction = a.outlier_fraction;
  p.min_od_norm = a.min_od_norm;
  p.intensity_floor = a.intensity_floor;
  p.centered = a.centered;
  p.i0 = img.i0;
  p.seed = resolve_seed(g);
  const std::string slide = a.slide_id.empty() ? stem(a.input) : a.slide_id;
  const auto basis = stain_model::estimate_basis_for_slide(img, p, slide);
  io::write_text(a.out, basis.to_json());

  RunManifest m;
  m.command = "stain-estimate";
  m.config = {{"slide_id", slide}, {"outlier_fraction", p.outlier_fraction}, {"min_od_norm", p.min_od_norm},
              {"intensity_floor", p.intensity_floor}, {"centered", p.centered}};
  m.seeds["seed"] = p.seed;
  m.add_input(a.input);
  m.artifacts = {a.out};
  write_manifest(a.out + ".manifest.json", m, g);
  std::cout << "H " << basis.v_h[0] << " " << basis.v_h[1] << " " << basis.v_h[2] << "\n"
            << "E " << basis.v_e[0] << " " << basis.v_e[1] << " " << basis.v_e[2] << "\n";
  return 0;
}

// ---- separate ------------------------------------------------------------------

struct SeparateArgs {
  std::string input, basis, out_h, out_e, reconstruct, slide_id;
  bool allow_cross_basis = false;
};

int cmd_separate(const SeparateArgs& a, const Globals& g) {
  for (const auto& p : {a.out_h, a.out_e}) ensure_writable(p, g);
  if (!a.reconstruct.empty()) ensure_writable(a.reconstruct, g);
  ensure_writable(a.out_h + ".manifest.json", g);
  const auto basis = stain_model::StainBasis::from_json(io::read_text(a.basis));
  basis.validate();
  const RgbImage img = io::read_image(a.input);
  const std::string slide = a.slide_id.empty() ? stem(a.input) : a.slide_id;
  if (!a.allow_cross_basis && !basis.slide_id.empty() && basis.slide_id != slide)
    fail(ErrorKind::kBasisMismatch, "basis was estimated for slide '" + basis.slide_id + "' but the image is slide '" +
                                        slide + "' (pass --allow-cross-basis to apply it anyway)");
  if (basis.params.i0 != img.i0) fail(ErrorKind::kBasisMismatch, "basis white point differs from the image's");

  auto [h, e] = separation::separate_normalized(img, basis);
  io::write_png_gray16(a.out_h, h.values);
  io::write_png_gray16(a.out_e, e.values);
  RunManifest m;
  m.command = "separate";
  m.config = {{"slide_id", slide}, {"allow_cross_basis", a.allow_cross_basis}};
  m.add_input(a.input);
  m.add_input(a.basis);
  m.artifacts = {a.out_h, a.out_e};
  if (!a.reconstruct.empty()) {
    const auto rec = separation::reconstruct_rgb(h, e, basis);
    io::write_png_rgb8(a.reconstruct, rec.image);
    m.artifacts.push_back(a.reconstruct);
  }
  write_manifest(a.out_h + ".manifest.json", m, g);
  return 0;
}

// ---- tile ----------------------------------------------------------------------

struct TileArgs {
  std::string image, annotations, out, classes;
  int size = 400;
  int stride = 200;
  int unlabeled_stride = 0;
  double tissue_od = datapipe::kDefaultTissueOd;
  double tissue_fraction = datapipe::kDefaultTissueFraction;
  bool keep_background = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_tile(const TileArgs& a, const Globals& g) {
  const auto ann = datapipe::parse_annotations(io::read_text(a.annotations));
  const RgbImage img = io::read_image(a.image);
  std::vector<std::string> classes = split_list(a.classes);
  if (classes.empty()) {
    std::set<std::string> names;
    for (const auto& p : ann.polygons) names.insert(p.label);
    classes.assign(names.begin(), names.end());
  }
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<int>(i);
  const std::string slide = ann.slide_id.empty() ? stem(a.image) : ann.slide_id;
  const datapipe::TileGrid grid{a.size, a.stride, a.unlabeled_stride};
  const auto tiles = datapipe::extract_tiles(img.width, img.height, ann.polygons, index, grid, slide);

  prepare_dir(a.out, g);
  json list = json::array();
  std::map<std::string, int> counts;
  for (const auto& c : classes) counts[c] = 0;
  int unlabeled = 0, dropped = 0;
  auto emit = [&](const datapipe::TileSample& t) {
    const RgbImage tile = img.crop(t.x, t.y, t.size, t.size);
    if (!a.keep_background && !datapipe::foreground_filter(tile, a.tissue_od, a.tissue_fraction)) {
      ++dropped;
      return;
    }
    const std::string group = t.label ? t.label_name : "unlabeled";
    const std::string rel = group + "/" + slide + "_" + std::to_string(t.x) + "_" + std::to_string(t.y) + ".png";
    fs::create_directories(fs::path(a.out) / group);
    io::write_png_rgb8((fs::path(a.out) / rel).string(), tile);
    list.push_back({{"file", rel}, {"x", t.x}, {"y", t.y}, {"size", t.size},
                    {"label", t.label ? json(t.label_name) : json(nullptr)}});
    if (t.label) ++counts[t.label_name];
    else ++unlabeled;
  };
  for (const auto& t : tiles.labeled) emit(t);
  for (const auto& t : tiles.unlabeled) emit(t);

  json idx = {{"slide_id", slide}, {"image", fs::path(a.image).filename().string()}, {"tile_size", a.size},
              {"stride", a.stride}, {"unlabeled_stride", a.unlabeled_stride}, {"classes", classes},
              {"tiles", list}};
  io::write_text((fs::path(a.out) / "index.json").string(), idx.dump(2) + "\n");

  RunManifest m;
  m.command = "tile";
  m.config = {{"size", a.size}, {"stride", a.stride}, {"unlabeled_stride", a.unlabeled_stride},
              {"tissue_od", a.tissue_od}, {"tissue_fraction", a.tissue_fraction}, {"keep_background", a.keep_background},
              {"classes", classes}};
  m.add_input(a.image);
  m.add_input(a.annotations);
  m.artifacts = {"index.json"};
  write_manifest((fs::path(a.out) / "run_manifest.json").string(), m, g);

  for (const auto& [name, n] : counts) std::cout << name << ": " << n << "\n";
  std::cout << "unlabeled: " << unlabeled << "\n";
  if (dropped > 0) std::cout << "background (dropped): " << dropped << "\n";
  return 0;
}

// ---- train / eval / heatmap ------------------------------------------------------

struct TrainArgs {
  std::string config, out;
  bool resume = false;
  bool plots = true;
};

std::vector<std::string> manifest_inputs(const datapipe::DatasetManifest& dm, const std::string& base) {
  std::vector<std::string> out;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (fs::path(base) / p).string(); };
  for (const auto& s : dm.slides) {
    out.push_back(resolve(s.image));
    if (!s.annotations.empty()) out.push_back(resolve(s.annotations));
    if (!s.basis.empty()) out.push_back(resolve(s.basis));
  }
  return out;
}

int cmd_train(const TrainArgs& a, const Globals& g) {
  auto cfg = config::parse_config(io::read_text(a.config));
  cfg.seed = g.seed ? *g.seed : cfg.seed;
  if (g.workers > 1) cfg.workers = cfg.deterministic ? 1 : g.workers;
  cfg.validate();
  if (cfg.manifest.empty()) fail(ErrorKind::kConfiguration, "config does not name a dataset manifest");
  const fs::path cfg_dir = fs::path(a.config).parent_path();
  const std::string manifest_path =
      fs::path(cfg.manifest).is_absolute() ? cfg.manifest : (cfg_dir / cfg.manifest).string();
  const auto dm = datapipe::parse_manifest(io::read_text(manifest_path));
  const std::string base = fs::path(manifest_path).parent_path().string();

  const std::string ckpt = (fs::path(a.out) / "checkpoint.json").string();
  const bool resuming = a.resume && fs::exists(ckpt);
  if (!resuming) prepare_dir(a.out, g);

  const auto data = trainer::load_datasets(dm, base, cfg);
  std::cerr << "hessl: " << data.labeled.size() << " labeled, " << data.unlabeled.size() << " unlabeled, "
            << data.val.size() << " val, " << data.test.size() << " test tiles\n";
  trainer::Trainer tr(cfg, data);
  if (resuming) tr.load_checkpoint(ckpt);
  io::write_text((fs::path(a.out) / "config.toml").string(), config::to_toml(cfg));

  trainer::FitOptions opt;
  opt.out_dir = a.out;
  opt.write_plots = a.plots;
  const auto report = tr.fit(opt);

  RunManifest m;
  m.command = "train";
  m.config = {{"toml", config::to_toml(cfg)}, {"resumed", resuming}};
  m.seeds["seed"] = cfg.seed;
  m.add_input(a.config);
  m.add_input(manifest_path);
  for (const auto& p : manifest_inputs(dm, base)) m.add_input(p);
  m.artifacts = {"checkpoint.json", "best_model.json", "report.json", "train_log.jsonl", "config.toml"};
  if (a.plots) {
    m.artifacts.push_back("loss_curves.png");
    m.artifacts.push_back("val_accuracy.png");
  }
  const std::string mpath = (fs::path(a.out) / "run_manifest.json").string();
  if (fs::exists(mpath)) fs::remove(mpath);
  write_manifest(mpath, m, g);

  json summary = {{"best_epoch", report.best_epoch},
                  {"epochs_run", report.epochs_run},
                  {"early_stopped", report.early_stopped},
                  {"best_val_balanced_accuracy", report.best_val.balanced_accuracy},
                  {"test_balanced_accuracy", report.has_test ? json(report.test.balanced_accuracy) : json(nullptr)},
                  {"train_accuracy", tr.train_accuracy()}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

struct EvalArgs {
  std::string checkpoint, manifest, split = "test", out;
};

int cmd_eval(const EvalArgs& a, const Globals& g) {
  if (!a.out.empty()) {
    ensure_writable(a.out, g);
    ensure_writable(a.out + ".manifest.json", g);
  }
  const auto loaded = trainer::load_model(a.checkpoint);
  auto dm = datapipe::parse_manifest(io::read_text(a.manifest));
  if (dm.classes != loaded.classes) fail(ErrorKind::kConfiguration, "manifest classes differ from the model's");
  datapipe::Split want;
  if (a.split == "test") want = datapipe::Split::kTest;
  else if (a.split == "val") want = datapipe::Split::kVal;
  else if (a.split == "train") want = datapipe::Split::kTrainLabeled;
  else fail(ErrorKind::kConfiguration, "unknown split '" + a.split + "' (train, val, test)");
  std::erase_if(dm.slides, [&](const datapipe::SlideEntry& s) { return s.split != want; });
  if (dm.slides.empty()) fail(ErrorKind::kEvaluation, "manifest has no " + a.split + " slides");

  const std::string base = fs::path(a.manifest).parent_path().string();
  auto data = trainer::load_datasets(dm, base, loaded.config);
  std::vector<trainer::EvalSample> samples = want == datapipe::Split::kTest ? data.test : data.val;
  if (want == datapipe::Split::kTrainLabeled)
    for (const auto& s : data.labeled) samples.push_back(trainer::prepare_eval(s.tile, *s.basis, s.label, loaded.config.augment));
  if (samples.empty()) fail(ErrorKind::kEvaluation, "no labeled tiles in the " + a.split + " split");

  const auto probs = trainer::predict(loaded.model, samples, loaded.config.eval_batch);
  const int c = loaded.model.num_classes();
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    truth.push_back(samples[i].label);
    const double* row = probs.data() + i * static_cast<std::size_t>(c);
    pred.push_back(static_cast<int>(std::max_element(row, row + c) - row));
  }
  const auto metrics = datapipe::evaluate(datapipe::confusion_matrix(truth, pred, c));
  const std::string text = trainer::metrics_to_json(metrics, loaded.classes);
  std::cout << text << std::endl;
  if (!a.out.empty()) {
    io::write_text(a.out, text + "\n");
    RunManifest m;
    m.command = "eval";
    m.config = {{"split", a.split}};
    m.seeds["seed"] = loaded.config.seed;
    m.add_input(a.checkpoint);
    m.add_input(a.manifest);
    m.artifacts = {a.out};
    write_manifest(a.out + ".manifest.json", m, g);
  }
  return 0;
}

struct HeatmapArgs {
  std::string checkpoint, image, basis, out, transparent;
  int tile_size = 400;
  int stride = 200;
  double tissue_od = datapipe::kDefaultTissueOd;
  double tissue_fraction = datapipe::kDefaultTissueFraction;
};

int cmd_heatmap(const HeatmapArgs& a, const Globals& g) {
  ensure_writable(a.out, g);
  ensure_writable(a.out + ".manifest.json", g);
  const auto loaded = trainer::load_model(a.checkpoint);
  const auto basis = stain_model::StainBasis::from_json(io::read_text(a.basis));
  basis.validate();
  const RgbImage img = io::read_image(a.image);
  heatmap::HeatmapOptions o;
  o.tile_size = a.tile_size;
  o.stride = a.stride;
  o.tissue_od = a.tissue_od;
  o.tissue_fraction = a.tissue_fraction;
  o.transparent_classes = split_list(a.transparent);
  o.batch = loaded.config.eval_batch;
  const auto hm = heatmap::render_heatmap(loaded.model, loaded.classes, img, basis, loaded.config.augment, o);
  io::write_png_rgba8(a.out, hm.width, hm.height, hm.rgba);

  RunManifest m;
  m.command = "heatmap";
  m.config = {{"tile_size", a.tile_size}, {"stride", a.stride}, {"tissue_od", a.tissue_od},
              {"tissue_fraction", a.tissue_fraction}, {"transparent", o.transparent_classes}};
  m.add_input(a.checkpoint);
  m.add_input(a.image);
  m.add_input(a.basis);
  m.artifacts = {a.out};
  write_manifest(a.out + ".manifest.json", m, g);
  int fg = 0;
  for (const auto& t : hm.tiles) fg += t.foreground ? 1 : 0;
  std::cout << "tiles: " << hm.tiles.size() << ", foreground: " << fg << "\n";
  return 0;
}

// ---- synth -----------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int rows = 8;
  int cols = 8;
  int tile = 40;
  int train_slides = 2;
  int val_slides = 1;
  int test_slides = 1;
  double stain_jitter = 4.0;
};

int cmd_synth(const SynthArgs& a, const Globals& g) {
  if (a.rows % 2 || a.cols % 2) fail(ErrorKind::kConfiguration, "rows and cols must be even (2x2 tile blocks)");
  prepare_dir(a.out, g);
  const std::uint64_t seed = resolve_seed(g);
  const std::vector<std::string> classes = {"sparse", "dense", "spindle"};
  const auto textures = synthetic::default_textures();
  const Stream root = make_stream(seed, {0x53594E54ull});

  datapipe::DatasetManifest dm;
  dm.classes = classes;
  dm.grid = {a.tile, a.tile / 2, a.tile};
  RunManifest m;
  m.command = "synth";
  m.seeds["seed"] = seed;

  const int total = a.train_slides + a.val_slides + a.test_slides;
  const int bcols = a.cols / 2, brows = a.rows / 2;
  for (int s = 0; s < total; ++s) {
    Stream rng = root.child({static_cast<std::uint64_t>(s)});
    std::vector<int> tile_classes(static_cast<std::size_t>(a.rows * a.cols));
    std::vector<int> skip;
    for (int br = 0; br < brows; ++br)
      for (int bc = 0; bc < bcols; ++bc) {
        const int id = br * bcols + bc;
        const int cls = (id + s) % static_cast<int>(classes.size());
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) tile_classes[static_cast<std::size_t>((br * 2 + r) * a.cols + bc * 2 + c)] = cls;
        // Checkerboard annotation keeps polygons apart; the rest stays unlabeled.
        if ((br + bc) % 2 == 1) skip.push_back(id);
      }
    Stream stain_rng = rng.child({1});
    const auto stains = synthetic::perturb(synthetic::reference_stains(), a.stain_jitter, stain_rng);
    Stream tex = rng.child({2});
    const std::string id = "slide" + std::to_string(s);
    const auto slide = synthetic::make_slide(id, a.rows, a.cols, a.tile, tile_classes, textures, stains, tex);
    const auto ann = synthetic::block_annotations(slide, 2, classes, 0.0, skip);
    io::write_png_rgb8((fs::path(a.out) / (id + ".png")).string(), slide.image);
    io::write_text((fs::path(a.out) / (id + ".annotations.json")).string(), datapipe::annotations_to_json(ann));
    const datapipe::Split split = s < a.train_slides                  ? datapipe::Split::kTrainLabeled
                                  : s < a.train_slides + a.val_slides ? datapipe::Split::kVal
                                                                      : datapipe::Split::kTest;
    dm.slides.push_back({id, id + ".png", id + ".annotations.json", "", split});
    m.artifacts.push_back(id + ".png");
    m.artifacts.push_back(id + ".annotations.json");
  }
  io::write_text((fs::path(a.out) / "dataset.json").string(), datapipe::manifest_to_json(dm));

  config::TrainConfig cfg;
  cfg.manifest = "dataset.json";
  cfg.seed = seed;
  cfg.augment.crop_size = a.tile - 8;
  cfg.encoder.stem_width = 8;
  cfg.encoder.stem_stride = 2;
  cfg.encoder.stage_widths = {8, 16, 32};
  cfg.encoder.feature_dim = 32;
  cfg.batch = datapipe::BatchComposition::uniform(static_cast<int>(classes.size()), 8, 16);
  cfg.optimizer.learning_rate = 1e-3;
  cfg.iterations_per_epoch = 50;
  cfg.max_epochs = 6;
  cfg.patience_epochs = 3;
  io::write_text((fs::path(a.out) / "config.toml").string(), config::to_toml(cfg));
  m.artifacts.push_back("dataset.json");
  m.artifacts.push_back("config.toml");
  m.config = {{"rows", a.rows}, {"cols", a.cols}, {"tile", a.tile}, {"train_slides", a.train_slides},
              {"val_slides", a.val_slides}, {"test_slides", a.test_slides}, {"stain_jitter", a.stain_jitter}};
  write_manifest((fs::path(a.out) / "run_manifest.json").string(), m, g);
  std::cout << "wrote " << total << " slides to " << a.out << "\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  Globals g;
  for (int i = 0; i < argc; ++i) g.argv.emplace_back(argv[i]);

  CLI::App app{"hessl: stain separation and semi-supervised H&E tile classification"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json-errors", g.json_errors, "Print errors as JSON on stderr");
  app.add_flag("--force", g.force, "Overwrite existing outputs");
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for all randomness (default: drawn and recorded)");
  app.add_option("--workers", g.workers, "Data-pipeline threads (forced to 1 in deterministic mode)")
      ->check(CLI::PositiveNumber);

  StainEstimateArgs se;
  auto* c_se = app.add_subcommand("stain-estimate", "Estimate the per-slide H/E stain basis");
  c_se->add_option("--input", se.input, "Slide image (PNG or TIFF)")->required();
  c_se->add_option("--out", se.out, "Basis JSON to write")->required();
  c_se->add_option("--outlier-fraction", se.outlier_fraction, "Angle percentile cut")->capture_default_str();
  c_se->add_option("--min-od-norm", se.min_od_norm, "Minimum OD norm of tissue pixels")->capture_default_str();
  c_se->add_option("--intensity-floor", se.intensity_floor)->capture_default_str();
  c_se->add_option("--slide-id", se.slide_id, "Defaults to the input file stem");
  c_se->add_flag("--centered", se.centered, "Fit the plane to the centred covariance");

  SeparateArgs sp;
  auto* c_sp = app.add_subcommand("separate", "Write normalised H and E concentration images");
  c_sp->add_option("--input", sp.input)->required();
  c_sp->add_option("--basis", sp.basis)->required();
  c_sp->add_option("--out-h", sp.out_h, "16-bit grey PNG")->required();
  c_sp->add_option("--out-e", sp.out_e, "16-bit grey PNG")->required();
  c_sp->add_option("--reconstruct", sp.reconstruct, "8-bit RGB reconstruction PNG");
  c_sp->add_option("--slide-id", sp.slide_id, "Defaults to the input file stem");
  c_sp->add_flag("--allow-cross-basis", sp.allow_cross_basis, "Apply a basis from another slide");

  TileArgs tl;
  auto* c_tl = app.add_subcommand("tile", "Cut labeled and unlabeled tiles from an annotated image");
  c_tl->add_option("--image", tl.image)->required();
  c_tl->add_option("--annotations", tl.annotations)->required();
  c_tl->add_option("--out", tl.out, "Output directory")->required();
  c_tl->add_option("--size", tl.size)->capture_default_str();
  c_tl->add_option("--stride", tl.stride)->capture_default_str();
  c_tl->add_option("--unlabeled-stride", tl.unlabeled_stride, "0 = same as --stride")->capture_default_str();
  c_tl->add_option("--classes", tl.classes, "Comma-separated class order (default: sorted labels)");
  c_tl->add_option("--tissue-od", tl.tissue_od)->capture_default_str();
  c_tl->add_option("--tissue-fraction", tl.tissue_fraction)->capture_default_str();
  c_tl->add_flag("--keep-background", tl.keep_background, "Skip the foreground filter");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train from a config file");
  c_tr->add_option("--config", tr.config)->required();
  c_tr->add_option("--out", tr.out, "Run directory")->required();
  c_tr->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint.json");
  c_tr->add_flag("!--no-plots", tr.plots, "Skip PNG curve plots");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  c_ev->add_option("--checkpoint", ev.checkpoint)->required();
  c_ev->add_option("--manifest", ev.manifest)->required();
  c_ev->add_option("--split", ev.split)->capture_default_str();
  c_ev->add_option("--out", ev.out, "Metrics JSON to write");

  HeatmapArgs hm;
  auto* c_hm = app.add_subcommand("heatmap", "Render a class overlay for a slide");
  c_hm->add_option("--checkpoint", hm.checkpoint)->required();
  c_hm->add_option("--image", hm.image)->required();
  c_hm->add_option("--basis", hm.basis)->required();
  c_hm->add_option("--out", hm.out, "RGBA PNG")->required();
  c_hm->add_option("--tile-size", hm.tile_size)->capture_default_str();
  c_hm->add_option("--stride", hm.stride)->capture_default_str();
  c_hm->add_option("--tissue-od", hm.tissue_od)->capture_default_str();
  c_hm->add_option("--tissue-fraction", hm.tissue_fraction)->capture_default_str();
  c_hm->add_option("--transparent", hm.transparent, "Comma-separated classes left transparent");

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "Generate a synthetic annotated dataset and config");
  c_sy->add_option("--out", sy.out)->required();
  c_sy->add_option("--rows", sy.rows)->capture_default_str();
  c_sy->add_option("--cols", sy.cols)->capture_default_str();
  c_sy->add_option("--tile", sy.tile)->capture_default_str();
  c_sy->add_option("--train-slides", sy.train_slides)->capture_default_str();
  c_sy->add_option("--val-slides", sy.val_slides)->capture_default_str();
  c_sy->add_option("--test-slides", sy.test_slides)->capture_default_str();
  c_sy->add_option("--stain-jitter", sy.stain_jitter, "Degrees")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error(g, ErrorKind::kConfiguration, e.what());
    return exit_code(ErrorKind::kConfiguration);
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*c_se) return cmd_stain_estimate(se, g);
    if (*c_sp) return cmd_separate(sp, g);
    if (*c_tl) return cmd_tile(tl, g);
    if (*c_tr) return cmd_train(tr, g);
    if (*c_ev) return cmd_eval(ev, g);
    if (*c_hm) return cmd_heatmap(hm, g);
    if (*c_sy) return cmd_synth(sy, g);
  } catch (const Error& e) {
    report_error(g, e.kind(), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    report_error(g, ErrorKind::kIo, e.what());
    return exit_code(ErrorKind::kIo);
  } catch (const std::exception& e) {
    report_error(g, ErrorKind::kInvalidInput, e.what());
    return 1;
  }
  return 1;
}

}  // namespace hessl::cli
