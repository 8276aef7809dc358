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

#include "hessl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "hessl/augment.hpp"
#include "hessl/image_io.hpp"
#include "hessl/plot.hpp"
#include "hessl/separation.hpp"
#include "hessl/ssl_losses.hpp"
#include "hessl/version.hpp"
#include "json.hpp"

namespace hessl::trainer {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kStepTag = 0x53544550;  // "STEP"
constexpr int kCheckpointVersion = 1;

std::vector<std::vector<std::size_t>> class_pools(const Datasets& d) {
  std::vector<std::vector<std::size_t>> pools(d.classes.size());
  for (std::size_t i = 0; i < d.labeled.size(); ++i) {
    const int c = d.labeled[i].label;
    if (c < 0 || c >= static_cast<int>(d.classes.size()))
      fail(ErrorKind::kConfiguration, "labeled sample " + std::to_string(i) + " has no valid class");
    pools[static_cast<std::size_t>(c)].push_back(i);
  }
  return pools;
}

std::vector<std::size_t> iota_pool(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

const TrainConfig& checked(const TrainConfig& c, const Datasets& d) {
  c.validate();
  if (d.classes.size() < 2) fail(ErrorKind::kConfiguration, "need at least two classes");
  if (c.batch.per_class_labeled.size() != d.classes.size())
    fail(ErrorKind::kConfiguration, "batch.per_class_labeled lists " + std::to_string(c.batch.per_class_labeled.size()) +
                                        " classes but the dataset has " + std::to_string(d.classes.size()));
  return c;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

json step_json(const StepRecord& r) {
  return json{{"type", "step"}, {"iteration", r.iteration}, {"epoch", r.epoch}, {"ce", r.ce},
              {"l2", r.l2},     {"contrastive", r.contrastive}, {"total", r.total}};
}

json epoch_json(const EpochRecord& r) {
  return json{{"type", "epoch"},
              {"epoch", r.epoch},
              {"learning_rate", r.learning_rate},
              {"mean_total", r.mean_total},
              {"val_balanced_accuracy", r.val_balanced_accuracy},
              {"val_accuracy", r.val_accuracy},
              {"improved", r.improved}};
}

json params_json(const std::vector<const nn::Param*>& params) {
  json out = json::array();
  for (const nn::Param* p : params) out.push_back({{"name", p->name}, {"value", p->value}});
  return out;
}

json values_json(const std::vector<const nn::Param*>& names, const std::vector<std::vector<double>>& values) {
  json out = json::array();
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({{"name", names[i]->name}, {"value", values[i]}});
  return out;
}

std::vector<std::vector<double>> read_params(const json& arr, const std::vector<nn::Param*>& params) {
  if (!arr.is_array() || arr.size() != params.size())
    fail(ErrorKind::kConfiguration, "checkpoint parameter count does not match the model");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& item = arr[i];
    if (item.at("name").get<std::string>() != params[i]->name)
      fail(ErrorKind::kConfiguration, "checkpoint parameter '" + item.at("name").get<std::string>() + "' where '" +
                                          params[i]->name + "' was expected");
    auto v = item.at("value").get<std::vector<double>>();
    if (v.size() != params[i]->value.size())
      fail(ErrorKind::kConfiguration, "checkpoint parameter '" + params[i]->name + "' has the wrong size");
    out.push_back(std::move(v));
  }
  return out;
}

json parse_json_file(const std::string& path) {
  const std::string text = io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfiguration, path + ": not a valid checkpoint (" + e.what() + ")");
  }
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  io::write_text(tmp, content);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < w; ++t)
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

EvalSample prepare_eval(const RgbImage& tile, const stain_model::StainBasis& basis, int label,
                        const augment::AugmentPolicy& policy) {
  auto [h, e] = separation::separate_normalized(tile, basis);
  EvalSample s;
  s.label = label;
  if (policy.eval_center_crop) {
    s.h = augment::center_crop(h.values, policy.crop_size);
    s.e = augment::center_crop(e.values, policy.crop_size);
  } else {
    s.h = std::move(h.values);
    s.e = std::move(e.values);
  }
  return s;
}

Datasets load_datasets(const datapipe::DatasetManifest& manifest, const std::string& base_dir,
                       const TrainConfig& config) {
  manifest.check_no_leakage();
  Datasets d;
  d.classes = manifest.classes;
  const auto index = manifest.class_index();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (fs::path(base_dir) / p).string(); };

  for (const auto& slide : manifest.slides) {
    const RgbImage img = io::read_image(resolve(slide.image));
    std::shared_ptr<const stain_model::StainBasis> basis;
    if (!slide.basis.empty()) {
      auto b = stain_model::StainBasis::from_json(io::read_text(resolve(slide.basis)));
      b.validate();
      basis = std::make_shared<const stain_model::StainBasis>(std::move(b));
    } else {
      stain_model::StainParams p = config.stain;
      p.seed = config.seed;
      p.i0 = img.i0;
      basis = std::make_shared<const stain_model::StainBasis>(stain_model::estimate_basis_for_slide(img, p, slide.slide_id));
    }

    std::vector<datapipe::PolygonAnnotation> polygons;
    if (!slide.annotations.empty()) {
      auto a = datapipe::parse_annotations(io::read_text(resolve(slide.annotations)));
      polygons = std::move(a.polygons);
    }
    const auto tiles = datapipe::extract_tiles(img.width, img.height, polygons, index, manifest.grid, slide.slide_id);

    auto keep = [&](const datapipe::TileSample& t, RgbImage* out) {
      *out = img.crop(t.x, t.y, t.size, t.size);
      return datapipe::foreground_filter(*out, manifest.tissue_od, manifest.tissue_fraction, basis->params.intensity_floor);
    };
    RgbImage tile;
    switch (slide.split) {
      case datapipe::Split::kTrainLabeled:
        for (const auto& t : tiles.labeled)
          if (keep(t, &tile)) d.labeled.push_back({tile, basis, *t.label});
        for (const auto& t : tiles.unlabeled)
          if (keep(t, &tile)) d.unlabeled.push_back({tile, basis, -1});
        break;
      case datapipe::Split::kTrainUnlabeled:
        for (const auto* group : {&tiles.labeled, &tiles.unlabeled})
          for (const auto& t : *group)
            if (keep(t, &tile)) d.unlabeled.push_back({tile, basis, -1});
        break;
      case datapipe::Split::kVal:
      case datapipe::Split::kTest: {
        auto& dst = slide.split == datapipe::Split::kVal ? d.val : d.test;
        for (const auto& t : tiles.labeled)
          if (keep(t, &tile)) dst.push_back(prepare_eval(tile, *basis, *t.label, config.augment));
        break;
      }
    }
  }
  return d;
}

std::vector<double> predict(const nn::DualEncoder& model, std::span<const EvalSample> samples, int batch) {
  std::vector<double> probs;
  probs.reserve(samples.size() * static_cast<std::size_t>(model.num_classes()));
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch));
    std::vector<Plane<float>> hs, es;
    for (std::size_t i = start; i < end; ++i) {
      hs.push_back(samples[i].h);
      es.push_back(samples[i].e);
    }
    const auto out = model.forward(nn::make_batch(hs), nn::make_batch(es), nullptr);
    probs.insert(probs.end(), out.probs.begin(), out.probs.end());
  }
  return probs;
}

namespace {

datapipe::Metrics metrics_for(const nn::DualEncoder& model, std::span<const EvalSample> samples, int batch) {
  if (samples.empty()) fail(ErrorKind::kEvaluation, "evaluation set is empty");
  const int c = model.num_classes();
  const auto probs = predict(model, samples, batch);
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    truth.push_back(samples[i].label);
    const auto* row = probs.data() + i * static_cast<std::size_t>(c);
    pred.push_back(static_cast<int>(std::max_element(row, row + c) - row));
  }
  return datapipe::evaluate(datapipe::confusion_matrix(truth, pred, c));
}

}  // namespace

Trainer::Trainer(TrainConfig config, const Datasets& data)
    : config_(checked(config, data)),
      data_(data),
      model_(config_.encoder, static_cast<int>(data.classes.size())),
      optimizer_(config_.optimizer),
      sampler_(class_pools(data), iota_pool(data.unlabeled.size()), config_.batch, config_.seed, data.classes) {
  model_.init(config_.seed);
  for (const auto& s : data_.labeled)
    train_eval_.push_back(prepare_eval(s.tile, *s.basis, s.label, augment::AugmentPolicy::identity(config_.augment.crop_size)));
}

Trainer::View Trainer::make_view(const TrainSample& s, const Stream& rng) const {
  Stream jitter = rng.child({0});
  const RgbImage jittered = augment::jitter_rgb(s.tile, config_.augment, jitter);
  auto [h, e] = separation::separate_normalized(jittered, *s.basis);
  auto pair = augment::augment_he_pair(h, e, config_.augment, rng.child({1}));
  return {std::move(pair.h.values), std::move(pair.e.values)};
}

std::vector<Trainer::View> Trainer::make_views(const std::vector<const TrainSample*>& samples,
                                               const std::vector<Stream>& streams) const {
  std::vector<View> views(samples.size());
  parallel_for(samples.size(), config_.workers, [&](std::size_t i) { views[i] = make_view(*samples[i], streams[i]); });
  return views;
}

StepRecord Trainer::train_step() {
  ssl::SslHyperParams hp = config_.ssl;
  const int num_classes = static_cast<int>(data_.classes.size());
  const std::uint64_t it = state_.iteration;
  if (config_.unlabeled_rampup_iterations > 0)
    hp.lambda_u *= std::min(1.0, static_cast<double>(it) / config_.unlabeled_rampup_iterations);
  const Stream step = make_stream(config_.seed, {kStepTag, it});
  const datapipe::BatchIndices batch = sampler_.batch(it);
  const auto n_u = static_cast<std::uint64_t>(batch.unlabeled.size());
  const auto k_aug = static_cast<std::uint64_t>(hp.k_augment);

  // (a) K views per unlabeled sample -> averaged, sharpened pseudo-labels.
  std::vector<const TrainSample*> src;
  std::vector<Stream> streams;
  for (std::uint64_t j = 0; j < n_u; ++j)
    for (std::uint64_t k = 0; k < k_aug; ++k) {
      src.push_back(&data_.unlabeled[batch.unlabeled[j]]);
      streams.push_back(step.child({1, j, k}));
    }
  const auto u_views = make_views(src, streams);
  std::vector<ssl::LabelDistribution> pseudo;
  if (!u_views.empty()) {
    std::vector<EvalSample> tmp;
    tmp.reserve(u_views.size());
    for (const auto& v : u_views) tmp.push_back({v.h, v.e, -1});
    const auto probs = trainer::predict(model_, tmp, static_cast<int>(tmp.size()));
    for (std::uint64_t j = 0; j < n_u; ++j) {
      std::vector<ssl::LabelDistribution> preds;
      for (std::uint64_t k = 0; k < k_aug; ++k) {
        const auto* row = probs.data() + (j * k_aug + k) * static_cast<std::size_t>(num_classes);
        preds.emplace_back(std::vector<double>(row, row + num_classes));
      }
      pseudo.push_back(ssl::sharpen(ssl::average_predictions(preds), hp.temperature));
    }
  }

  // (b) labeled views with one-hot targets.
  const std::uint64_t l_aug = config_.labeled_k_augment ? k_aug : 1;
  src.clear();
  streams.clear();
  std::vector<int> l_labels;
  for (std::uint64_t i = 0; i < batch.labeled.size(); ++i)
    for (std::uint64_t a = 0; a < l_aug; ++a) {
      src.push_back(&data_.labeled[batch.labeled[i].second]);
      streams.push_back(step.child({2, i, a}));
      l_labels.push_back(batch.labeled[i].first);
    }
  auto l_views = make_views(src, streams);

  // (c) MixUp over a shuffled pairing of L and U.
  std::vector<ssl::MixSample> pool;
  for (std::size_t i = 0; i < l_views.size(); ++i)
    pool.push_back({std::move(l_views[i].h), std::move(l_views[i].e), ssl::LabelDistribution::one_hot(num_classes, l_labels[i]), true});
  for (std::uint64_t j = 0; j < n_u; ++j) {
    const auto& v = u_views[j * k_aug];
    pool.push_back({v.h, v.e, pseudo[j], false});
  }
  const std::size_t n = pool.size();
  std::vector<std::size_t> perm = iota_pool(n);
  Stream shuffle = step.child({3});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[shuffle.below(i)]);
  std::vector<ssl::MixSample> mixed;
  mixed.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream lam = step.child({4, i});
    mixed.push_back(ssl::mixup(pool[i], pool[perm[i]], lam.beta(hp.alpha, hp.alpha)));
  }

  // (d) forward on every mixed sample.
  std::vector<Plane<float>> hs, es;
  for (const auto& m : mixed) {
    hs.push_back(m.h);
    es.push_back(m.e);
  }
  nn::DualEncoder::Cache cache;
  const nn::DualOutput out = model_.forward(nn::make_batch(hs), nn::make_batch(es), &cache);
  const std::size_t dim = static_cast<std::size_t>(out.feature_dim);

  // (e) contrastive terms, negative = next sample's E feature.
  std::vector<double> d_fh(out.f_h.size(), 0.0), d_fe(out.f_e.size(), 0.0);
  std::vector<double> terms;
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + 1) % n;
      const auto g = ssl::contrastive_loss_grad(out.feature_h(static_cast<int>(i)), out.feature_e(static_cast<int>(i)),
                                                out.feature_e(static_cast<int>(k)), hp.margin);
      terms.push_back(g.loss);
      if (hp.lambda_c == 0.0 || g.loss <= 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        d_fh[i * dim + j] += hp.lambda_c * g.d_f_h_i[j];
        d_fe[i * dim + j] += hp.lambda_c * g.d_f_e_i[j];
        d_fe[k * dim + j] += hp.lambda_c * g.d_f_e_k[j];
      }
    }
  }

  // (f) total loss and its gradient on the logits.
  std::vector<ssl::PredictionTarget> lab, unl;
  for (std::size_t i = 0; i < n; ++i) {
    ssl::PredictionTarget pt{ssl::LabelDistribution(std::vector<double>(out.prediction(static_cast<int>(i)).begin(),
                                                                        out.prediction(static_cast<int>(i)).end())),
                             mixed[i].label};
    (mixed[i].labeled ? lab : unl).push_back(std::move(pt));
  }
  const ssl::LossBreakdown loss = ssl::total_loss(lab, unl, terms, hp);
  if (!std::isfinite(loss.total))
    fail(ErrorKind::kNumericFault, "non-finite loss at iteration " + std::to_string(it));

  std::vector<double> d_logits(out.logits.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = out.prediction(static_cast<int>(i));
    const auto t = mixed[i].label.probs();
    std::vector<double> d_p;
    if (mixed[i].labeled) {
      d_p = ssl::cross_entropy_grad(p, t);
      for (double& v : d_p) v /= static_cast<double>(lab.size());
    } else {
      if (hp.lambda_u == 0.0) continue;
      d_p = ssl::squared_l2_grad(p, t);
      const double scale = hp.lambda_u / (static_cast<double>(num_classes) * static_cast<double>(unl.size()));
      for (double& v : d_p) v *= scale;
    }
    const auto dz = ssl::softmax_backward(p, d_p);
    std::copy(dz.begin(), dz.end(), d_logits.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(num_classes)));
  }

  // (g) backward and update.
  model_.zero_grad();
  model_.backward(cache, d_fh, d_fe, d_logits);
  const auto params = model_.parameters();
  for (const nn::Param* p : params)
    if (!all_finite(p->grad))
      fail(ErrorKind::kNumericFault, "non-finite gradient in " + p->name + " at iteration " + std::to_string(it));
  optimizer_.step(params, state_.epoch);

  StepRecord rec{it, state_.epoch, loss.ce, loss.l2, loss.contrastive, loss.total};
  state_.steps.push_back(rec);
  ++state_.iteration;
  ++state_.iteration_in_epoch;
  return rec;
}

std::vector<double> Trainer::predict(std::span<const EvalSample> samples) const {
  return trainer::predict(model_, samples, config_.eval_batch);
}

datapipe::Metrics Trainer::validate(std::span<const EvalSample> samples) const {
  return metrics_for(model_, samples, config_.eval_batch);
}

double Trainer::train_accuracy() const { return metrics_for(model_, train_eval_, config_.eval_batch).accuracy; }

void Trainer::remember_best() {
  best_params_.clear();
  for (const nn::Param* p : model_.parameters()) best_params_.push_back(p->value);
}

void Trainer::restore_best() {
  if (best_params_.empty()) return;
  const auto params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params_[i];
}

FitReport Trainer::fit(const FitOptions& options) {
  const bool persist = !options.out_dir.empty();
  std::ofstream log;
  if (persist) {
    fs::create_directories(options.out_dir);
    const auto log_path = fs::path(options.out_dir) / "train_log.jsonl";
    log.open(log_path, state_.iteration > 0 ? std::ios::app : std::ios::trunc);
    if (!log) fail(ErrorKind::kIo, "cannot open " + log_path.string());
  }
  auto emit = [&](const json& j) {
    const std::string line = j.dump();
    if (log.is_open()) log << line << '\n';
    if (options.on_log) options.on_log(line);
  };
  const std::string ckpt = persist ? (fs::path(options.out_dir) / "checkpoint.json").string() : "";

  while (!state_.finished) {
    double epoch_total = 0.0;
    int epoch_steps = 0;
    while (state_.iteration_in_epoch < config_.iterations_per_epoch) {
      StepRecord r;
      try {
        r = train_step();
      } catch (const Error& e) {
        if (persist && e.kind() == ErrorKind::kNumericFault)
          save_checkpoint((fs::path(options.out_dir) / "last_good.json").string());
        throw;
      }
      epoch_total += r.total;
      ++epoch_steps;
      emit(step_json(r));
      if (persist && config_.checkpoint_every > 0 && state_.iteration % static_cast<std::uint64_t>(config_.checkpoint_every) == 0)
        save_checkpoint(ckpt);
    }

    const datapipe::Metrics m = validate(data_.val);
    EpochRecord er;
    er.epoch = state_.epoch;
    er.learning_rate = optimizer_.learning_rate(state_.epoch);
    er.mean_total = epoch_steps > 0 ? epoch_total / epoch_steps : 0.0;
    er.val_balanced_accuracy = m.balanced_accuracy;
    er.val_accuracy = m.accuracy;
    er.improved = m.balanced_accuracy > state_.best_val_accuracy;
    if (er.improved) {
      state_.best_val_accuracy = m.balanced_accuracy;
      state_.best_epoch = state_.epoch;
      state_.epochs_since_best = 0;
      remember_best();
      if (persist) save_best_model((fs::path(options.out_dir) / "best_model.json").string());
    } else {
      ++state_.epochs_since_best;
    }
    state_.epochs.push_back(er);
    emit(epoch_json(er));

    ++state_.epoch;
    state_.iteration_in_epoch = 0;
    if (state_.epochs_since_best > config_.patience_epochs) {
      state_.finished = true;
      state_.early_stopped = true;
    } else if (state_.epoch >= config_.max_epochs) {
      state_.finished = true;
    }
    if (persist) save_checkpoint(ckpt);
  }

  FitReport report;
  report.best_epoch = state_.best_epoch;
  report.epochs_run = state_.epoch;
  report.early_stopped = state_.early_stopped;
  report.steps = state_.steps;
  report.epochs = state_.epochs;
  report.config_toml = config::to_toml(config_);
  report.seed = config_.seed;

  nn::DualEncoder best = model_;
  if (!best_params_.empty()) {
    const auto params = best.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params_[i];
  }
  report.best_val = metrics_for(best, data_.val, config_.eval_batch);
  if (!data_.test.empty()) {
    report.test = metrics_for(best, data_.test, config_.eval_batch);
    report.has_test = true;
  }

  if (persist) {
    write_atomic((fs::path(options.out_dir) / "report.json").string(), report_to_json(report, data_.classes));
    if (options.write_plots) {
      std::vector<double> total, ce, l2, con, val;
      for (const auto& s : report.steps) {
        total.push_back(s.total);
        ce.push_back(s.ce);
        l2.push_back(s.l2);
        con.push_back(s.contrastive);
      }
      for (const auto& e : report.epochs) val.push_back(e.val_balanced_accuracy);
      plot::write_line_plot((fs::path(options.out_dir) / "loss_curves.png").string(),
                            {{"total", total}, {"ce", ce}, {"l2", l2}, {"contrastive", con}});
      plot::write_line_plot((fs::path(options.out_dir) / "val_accuracy.png").string(), {{"val balanced accuracy", val}});
    }
  }
  return report;
}

void Trainer::save_checkpoint(const std::string& path) const {
  const auto params = model_.parameters();
  json j;
  j["format"] = "hessl-checkpoint";
  j["version"] = kCheckpointVersion;
  j["tool_version"] = kVersion;
  j["config"] = config::to_toml(config_);
  j["classes"] = data_.classes;
  j["state"] = {{"epoch", state_.epoch},
                {"iteration", state_.iteration},
                {"iteration_in_epoch", state_.iteration_in_epoch},
                {"best_val_accuracy", state_.best_val_accuracy},
                {"epochs_since_best", state_.epochs_since_best},
                {"best_epoch", state_.best_epoch},
                {"finished", state_.finished},
                {"early_stopped", state_.early_stopped},
                {"rng", {{"seed", config_.seed}, {"step_counter", state_.iteration}}}};
  json steps = json::array();
  for (const auto& s : state_.steps) steps.push_back({s.iteration, s.epoch, s.ce, s.l2, s.contrastive, s.total});
  j["steps"] = std::move(steps);
  json epochs = json::array();
  for (const auto& e : state_.epochs) epochs.push_back(epoch_json(e));
  j["epochs"] = std::move(epochs);
  j["params"] = params_json(params);
  j["best_params"] = best_params_.empty() ? json::array() : values_json(params, best_params_);
  j["optimizer"] = optimizer_.state();
  write_atomic(path, j.dump());
}

void Trainer::load_checkpoint(const std::string& path) {
  const json j = parse_json_file(path);
  if (j.value("format", "") != "hessl-checkpoint" || j.value("version", 0) != kCheckpointVersion)
    fail(ErrorKind::kConfiguration, path + ": not a version " + std::to_string(kCheckpointVersion) + " training checkpoint");
  if (j.at("classes").get<std::vector<std::string>>() != data_.classes)
    fail(ErrorKind::kConfiguration, path + ": checkpoint classes differ from the dataset");
  const TrainConfig saved = config::parse_config(j.at("config").get<std::string>());
  if (!(saved.encoder == config_.encoder)) fail(ErrorKind::kConfiguration, path + ": encoder architecture differs");

  const auto params = model_.parameters();
  const auto values = read_params(j.at("params"), params);
  std::vector<std::vector<double>> best;
  if (!j.at("best_params").empty()) best = read_params(j.at("best_params"), params);
  auto opt_state = j.at("optimizer").get<std::vector<std::vector<double>>>();
  if (!opt_state.empty() && opt_state.size() != params.size())
    fail(ErrorKind::kConfiguration, path + ": optimizer state does not match the model");

  TrainState s;
  const auto& st = j.at("state");
  s.epoch = st.at("epoch").get<int>();
  s.iteration = st.at("iteration").get<std::uint64_t>();
  s.iteration_in_epoch = st.at("iteration_in_epoch").get<int>();
  s.best_val_accuracy = st.at("best_val_accuracy").get<double>();
  s.epochs_since_best = st.at("epochs_since_best").get<int>();
  s.best_epoch = st.at("best_epoch").get<int>();
  s.finished = st.at("finished").get<bool>();
  s.early_stopped = st.at("early_stopped").get<bool>();
  for (const auto& r : j.at("steps"))
    s.steps.push_back({r[0].get<std::uint64_t>(), r[1].get<int>(), r[2].get<double>(), r[3].get<double>(),
                       r[4].get<double>(), r[5].get<double>()});
  for (const auto& e : j.at("epochs"))
    s.epochs.push_back({e.at("epoch").get<int>(), e.at("learning_rate").get<double>(), e.at("mean_total").get<double>(),
                        e.at("val_balanced_accuracy").get<double>(), e.at("val_accuracy").get<double>(),
                        e.at("improved").get<bool>()});

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  best_params_ = std::move(best);
  optimizer_.state() = std::move(opt_state);
  state_ = std::move(s);
}

void Trainer::save_best_model(const std::string& path) const {
  const auto params = model_.parameters();
  json j;
  j["format"] = "hessl-model";
  j["version"] = kCheckpointVersion;
  j["tool_version"] = kVersion;
  j["config"] = config::to_toml(config_);
  j["classes"] = data_.classes;
  j["best_epoch"] = state_.best_epoch;
  j["params"] = best_params_.empty() ? params_json(params) : values_json(params, best_params_);
  write_atomic(path, j.dump());
}

LoadedModel load_model(const std::string& path) {
  const json j = parse_json_file(path);
  const std::string format = j.value("format", "");
  if (format != "hessl-checkpoint" && format != "hessl-model")
    fail(ErrorKind::kConfiguration, path + ": not a checkpoint or model file");
  LoadedModel m;
  m.config = config::parse_config(j.at("config").get<std::string>());
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.model = nn::DualEncoder(m.config.encoder, static_cast<int>(m.classes.size()));
  const auto params = m.model.parameters();
  const json& src = format == "hessl-checkpoint" && !j.at("best_params").empty() ? j.at("best_params") : j.at("params");
  const auto values = read_params(src, params);
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  return m;
}

std::string metrics_to_json(const datapipe::Metrics& m, const std::vector<std::string>& classes) {
  json per = json::object();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& pc = m.per_class[c];
    per[c < classes.size() ? classes[c] : std::to_string(c)] = {
        {"recall", pc.recall}, {"precision", pc.precision}, {"f_score", pc.f_score}, {"support", pc.support}};
  }
  json j = {{"balanced_accuracy", m.balanced_accuracy}, {"accuracy", m.accuracy}, {"per_class", per},
            {"confusion", m.confusion}};
  return j.dump(2);
}

std::string report_to_json(const FitReport& r, const std::vector<std::string>& classes) {
  json j;
  j["tool_version"] = kVersion;
  j["seed"] = r.seed;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run;
  j["early_stopped"] = r.early_stopped;
  j["best_val"] = json::parse(metrics_to_json(r.best_val, classes));
  j["test"] = r.has_test ? json::parse(metrics_to_json(r.test, classes)) : json(nullptr);
  json curves = {{"iteration", json::array()}, {"ce", json::array()}, {"l2", json::array()},
                 {"contrastive", json::array()}, {"total", json::array()}};
  for (const auto& s : r.steps) {
    curves["iteration"].push_back(s.iteration);
    curves["ce"].push_back(s.ce);
    curves["l2"].push_back(s.l2);
    curves["contrastive"].push_back(s.contrastive);
    curves["total"].push_back(s.total);
  }
  j["loss_curves"] = std::move(curves);
  json epochs = json::array();
  for (const auto& e : r.epochs) epochs.push_back(epoch_json(e));
  j["epochs"] = std::move(epochs);
  j["config"] = r.config_toml;
  j["environment"] = {{"compiler", __VERSION__},
                      {"cplusplus", static_cast<long>(__cplusplus)},
                      {"hardware_threads", std::thread::hardware_concurrency()}};
  return j.dump(2);
}

}  // namespace hessl::trainer
