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

#include "hessl/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>
#include <vector>

namespace hessl::config {

namespace {

struct Value {
  std::variant<bool, double, std::string, std::vector<double>> v;
  bool integral = false;
  int line = 0;
};

[[noreturn]] void config_error(int line, const std::string& what) {
  fail(ErrorKind::kConfiguration, "config line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

double parse_number(const std::string& tok, int line, bool* integral) {
  std::string t;
  for (char ch : tok)
    if (ch != '_') t += ch;
  if (t.empty()) config_error(line, "empty value");
  *integral = t.find_first_of(".eEn") == std::string::npos;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    config_error(line, "cannot parse value '" + tok + "'");
  return v;
}

Value parse_value(const std::string& raw, int line) {
  Value out;
  out.line = line;
  const std::string s = trim(raw);
  if (s.empty()) config_error(line, "missing value");
  if (s == "true" || s == "false") {
    out.v = s == "true";
    return out;
  }
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') config_error(line, "unterminated string");
    std::string str;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char n = s[++i];
        str += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        str += s[i];
      }
    }
    out.v = str;
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') config_error(line, "unterminated array");
    std::vector<double> items;
    bool all_integral = true;
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;  // trailing comma
      bool integral = false;
      items.push_back(parse_number(item, line, &integral));
      all_integral = all_integral && integral;
    }
    out.v = items;
    out.integral = all_integral;
    return out;
  }
  bool integral = false;
  out.v = parse_number(s, line, &integral);
  out.integral = integral;
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out += ch;
  }
  return out + "\"";
}

struct Field {
  std::string key;  // "section.name" or "name"
  std::function<void(const Value&)> set;
  std::function<std::string()> show;
};

double as_double(const Value& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v.v)) return *d;
  config_error(v.line, key + " expects a number");
}

long long as_integer(const Value& v, const std::string& key) {
  const double d = as_double(v, key);
  if (!v.integral) config_error(v.line, key + " expects an integer");
  return static_cast<long long>(d);
}

Field real(std::string key, double& ref) {
  return {key, [&ref, key](const Value& v) { ref = as_double(v, key); }, [&ref] { return fmt_double(ref); }};
}

Field integer(std::string key, int& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const long long n = as_integer(v, key);
            if (n < INT32_MIN || n > INT32_MAX) config_error(v.line, key + " out of range");
            ref = static_cast<int>(n);
          },
          [&ref] { return std::to_string(ref); }};
}

Field unsigned64(std::string key, std::uint64_t& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const long long n = as_integer(v, key);
            if (n < 0) config_error(v.line, key + " must be non-negative");
            ref = static_cast<std::uint64_t>(n);
          },
          [&ref] { return std::to_string(ref); }};
}

Field count(std::string key, std::size_t& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const long long n = as_integer(v, key);
            if (n < 0) config_error(v.line, key + " must be non-negative");
            ref = static_cast<std::size_t>(n);
          },
          [&ref] { return std::to_string(ref); }};
}

Field boolean(std::string key, bool& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const auto* b = std::get_if<bool>(&v.v);
            if (!b) config_error(v.line, key + " expects true or false");
            ref = *b;
          },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field text(std::string key, std::string& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const auto* s = std::get_if<std::string>(&v.v);
            if (!s) config_error(v.line, key + " expects a quoted string");
            ref = *s;
          },
          [&ref] { return quote(ref); }};
}

Field int_list(std::string key, std::vector<int>& ref) {
  return {key,
          [&ref, key](const Value& v) {
            const auto* a = std::get_if<std::vector<double>>(&v.v);
            if (!a || !v.integral) config_error(v.line, key + " expects an array of integers");
            ref.assign(a->begin(), a->end());
          },
          [&ref] {
            std::string s = "[";
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? ", " : "") + std::to_string(ref[i]);
            return s + "]";
          }};
}

std::vector<Field> fields(TrainConfig& c) {
  std::vector<Field> f;
  f.push_back(text("manifest", c.manifest));
  f.push_back(integer("iterations_per_epoch", c.iterations_per_epoch));
  f.push_back(integer("patience_epochs", c.patience_epochs));
  f.push_back(integer("max_epochs", c.max_epochs));
  f.push_back(unsigned64("seed", c.seed));
  f.push_back(boolean("deterministic", c.deterministic));
  f.push_back(boolean("labeled_k_augment", c.labeled_k_augment));
  f.push_back(integer("unlabeled_rampup_iterations", c.unlabeled_rampup_iterations));
  f.push_back(integer("workers", c.workers));
  f.push_back(integer("checkpoint_every", c.checkpoint_every));
  f.push_back(integer("eval_batch", c.eval_batch));

  f.push_back(real("ssl.margin", c.ssl.margin));
  f.push_back(real("ssl.temperature", c.ssl.temperature));
  f.push_back(integer("ssl.k_augment", c.ssl.k_augment));
  f.push_back(real("ssl.alpha", c.ssl.alpha));
  f.push_back(real("ssl.lambda_u", c.ssl.lambda_u));
  f.push_back(real("ssl.lambda_c", c.ssl.lambda_c));

  auto& a = c.augment;
  f.push_back(real("augment.rgb_brightness_jitter", a.rgb_brightness_jitter));
  f.push_back(real("augment.rgb_contrast_jitter", a.rgb_contrast_jitter));
  f.push_back(real("augment.rgb_saturation_jitter", a.rgb_saturation_jitter));
  f.push_back(integer("augment.crop_size", a.crop_size));
  f.push_back({"augment.rotation",
               [&a](const Value& v) {
                 const auto* s = std::get_if<std::string>(&v.v);
                 if (!s) config_error(v.line, "augment.rotation expects a quoted string");
                 try {
                   a.rotation = parse_rotation(*s);
                 } catch (const Error& e) {
                   config_error(v.line, e.what());
                 }
               },
               [&a] { return quote(rotation_name(a.rotation)); }});
  f.push_back(real("augment.max_rotation_deg", a.max_rotation_deg));
  f.push_back(boolean("augment.flip_horizontal", a.flip_horizontal));
  f.push_back(boolean("augment.flip_vertical", a.flip_vertical));
  f.push_back(real("augment.he_brightness_jitter", a.he_brightness_jitter));
  f.push_back(boolean("augment.eval_center_crop", a.eval_center_crop));

  f.push_back(int_list("batch.per_class_labeled", c.batch.per_class_labeled));
  f.push_back(integer("batch.unlabeled_count", c.batch.unlabeled_count));

  f.push_back(real("optimizer.learning_rate", c.optimizer.learning_rate));
  f.push_back(real("optimizer.decay_per_epoch", c.optimizer.decay_per_epoch));
  f.push_back(real("optimizer.rho", c.optimizer.rho));
  f.push_back(real("optimizer.epsilon", c.optimizer.epsilon));

  f.push_back(integer("encoder.input_channels", c.encoder.input_channels));
  f.push_back(integer("encoder.stem_width", c.encoder.stem_width));
  f.push_back(integer("encoder.stem_stride", c.encoder.stem_stride));
  f.push_back(int_list("encoder.stage_widths", c.encoder.stage_widths));
  f.push_back(integer("encoder.feature_dim", c.encoder.feature_dim));

  f.push_back(real("stain.outlier_fraction", c.stain.outlier_fraction));
  f.push_back(real("stain.min_od_norm", c.stain.min_od_norm));
  f.push_back(real("stain.intensity_floor", c.stain.intensity_floor));
  f.push_back(boolean("stain.centered", c.stain.centered));
  f.push_back(count("stain.max_pixels", c.stain.max_pixels));
  f.push_back(count("stain.min_pixels", c.stain.min_pixels));
  return f;
}

}  // namespace

const char* rotation_name(augment::Rotation r) {
  switch (r) {
    case augment::Rotation::kNone: return "none";
    case augment::Rotation::kRightAngle: return "right_angle";
    case augment::Rotation::kContinuous: return "continuous";
  }
  return "?";
}

augment::Rotation parse_rotation(const std::string& name) {
  if (name == "none") return augment::Rotation::kNone;
  if (name == "right_angle") return augment::Rotation::kRightAngle;
  if (name == "continuous") return augment::Rotation::kContinuous;
  fail(ErrorKind::kConfiguration, "unknown rotation mode '" + name + "' (none, right_angle, continuous)");
}

void TrainConfig::validate() const {
  ssl.validate();
  encoder.validate();
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfiguration, what); };
  if (augment.crop_size < 1) bad("augment.crop_size must be positive");
  if (batch.per_class_labeled.empty()) bad("batch.per_class_labeled must list every class");
  for (int n : batch.per_class_labeled)
    if (n < 1) bad("batch.per_class_labeled entries must be positive");
  if (batch.unlabeled_count < 0) bad("batch.unlabeled_count must be non-negative");
  if (iterations_per_epoch < 1) bad("iterations_per_epoch must be positive");
  if (patience_epochs < 0) bad("patience_epochs must be non-negative");
  if (max_epochs < 1) bad("max_epochs must be positive");
  if (workers < 1) bad("workers must be positive");
  if (checkpoint_every < 0) bad("checkpoint_every must be non-negative");
  if (unlabeled_rampup_iterations < 0) bad("unlabeled_rampup_iterations must be non-negative");
  if (eval_batch < 1) bad("eval_batch must be positive");
  if (!(optimizer.learning_rate > 0.0) || !(optimizer.decay_per_epoch > 0.0) || !(optimizer.rho >= 0.0 && optimizer.rho < 1.0) ||
      !(optimizer.epsilon > 0.0))
    bad("optimizer settings out of range");
  if (!(stain.outlier_fraction >= 0.0 && stain.outlier_fraction < 0.5)) bad("stain.outlier_fraction must be in [0, 0.5)");
  if (!(stain.min_od_norm >= 0.0) || !(stain.intensity_floor > 0.0)) bad("stain thresholds out of range");
  if (encoder.input_channels != 1) bad("encoder.input_channels must be 1 (one stain channel per encoder)");
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig c;
  std::map<std::string, Field> table;
  for (Field& f : fields(c)) table.emplace(f.key, std::move(f));

  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') config_error(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const auto& [k, _] : table) known = known || k.rfind(section + ".", 0) == 0;
      if (!known) config_error(line, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) config_error(line, "expected key = value");
    const std::string name = trim(s.substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto it = table.find(key);
    if (it == table.end()) config_error(line, "unknown key '" + key + "'");
    if (!seen.insert(key).second) config_error(line, "duplicate key '" + key + "'");
    it->second.set(parse_value(s.substr(eq + 1), line));
  }
  c.validate();
  return c;
}

std::string to_toml(const TrainConfig& c) {
  TrainConfig copy = c;
  std::string out;
  std::string section;
  for (const Field& f : fields(copy)) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + f.show() + "\n";
  }
  return out;
}

}  // namespace hessl::config
