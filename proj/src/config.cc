// Copyright (c) the BRM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <yaml-cpp/yaml.h>

#include "brm/errors.h"
#include "brm/experiment.h"

namespace brm {

std::vector<Method> ExperimentConfig::methodList() const {
  switch (methods) {
    case MethodSet::kBaseline: return {Method::kBaseline};
    case MethodSet::kProposed: return {Method::kProposed};
    case MethodSet::kBoth: return {Method::kBaseline, Method::kProposed};
  }
  return {};
}

std::vector<CodecModel> ExperimentConfig::codecModels() const {
  std::vector<CodecModel> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const ModelSpec& m = models[i];
    out.push_back(make_model(static_cast<int>(i), m.beta_train, m.delta_min, m.delta_max,
                             m.gain_scale));
  }
  return out;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.models = {
      {0.002, 0.1, 2.0, 0.002},
      {0.007, 0.3, 1.4, 0.0075},
      {0.015, 0.4, 2.0, 0.015},
      {0.05, 0.6, 6.0, 0.03},
  };
  c.targets = {0.06, 0.12, 0.25, 0.5, 0.75};
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (c.config_version != kConfigVersion) {
    throw ConfigError("config_version must be " + std::to_string(kConfigVersion));
  }
  if (c.models.empty()) throw ConfigError("models: at least one model is required");
  for (std::size_t i = 0; i < c.models.size(); ++i) {
    const ModelSpec& m = c.models[i];
    const std::string where = "models[" + std::to_string(i) + "]: ";
    if (!(m.beta_train > 0.0)) throw ConfigError(where + "beta_train must be positive");
    if (!(m.delta_min > 0.0 && m.delta_min <= 1.0 && m.delta_max >= 1.0)) {
      throw ConfigError(where + "need 0 < delta_min <= 1 <= delta_max");
    }
    if (!(m.gain_scale > 0.0)) throw ConfigError(where + "gain_scale must be positive");
  }
  if (c.targets.empty()) throw ConfigError("targets: at least one target is required");
  for (double t : c.targets) {
    if (!(t > 0.0)) throw ConfigError("targets: every target must be positive");
  }
  if (!(c.tolerance > 0.0 && c.tolerance < 1.0)) {
    throw ConfigError("tolerance must lie in (0, 1)");
  }
  if (c.search.binary_max_iters < 1 || c.search.loglinear_max_iters < 1) {
    throw ConfigError("search: max_iters must be >= 1");
  }
  if (c.oracle_grid < 64) throw ConfigError("oracle_grid must be >= 64");
  if (c.sweep_points < 2) throw ConfigError("sweep_points must be >= 2");
  if (c.synthetic_curves < 0) throw ConfigError("synthetic_curves must be >= 0");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
}

namespace {

int LineOf(const YAML::Node& node) { return node.Mark().line + 1; }

template <typename T>
T As(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    throw ParseError("config: bad value for '" + key + "'", e.mark.line + 1);
  }
}

void CheckKeys(const YAML::Node& map, const std::set<std::string>& allowed,
               const std::string& where) {
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.contains(key)) {
      throw ConfigError(where + "unknown key '" + key + "' (line " +
                        std::to_string(LineOf(kv.first)) + ")");
    }
  }
}

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ParseError("config: " + e.msg, e.mark.line + 1);
  }
  ExperimentConfig c = default_config();
  c.corpus_dir = Resolve(base_dir, "corpus");
  c.output_dir = Resolve(base_dir, "brm_out");
  if (root.IsNull()) {
    validate_config(c);
    return c;
  }
  if (!root.IsMap()) throw ParseError("config: top level must be a mapping", LineOf(root));

  CheckKeys(root,
            {"config_version", "corpus_dir", "output_dir", "tolerance", "methods", "targets",
             "models", "search", "oracle_grid", "sweep_points", "seed", "synthetic_curves",
             "workers"},
            "");
  if (auto n = root["config_version"]) c.config_version = As<int>(n, "config_version");
  if (auto n = root["corpus_dir"]) c.corpus_dir = Resolve(base_dir, As<std::string>(n, "corpus_dir"));
  if (auto n = root["output_dir"]) c.output_dir = Resolve(base_dir, As<std::string>(n, "output_dir"));
  if (auto n = root["tolerance"]) c.tolerance = As<double>(n, "tolerance");
  if (auto n = root["methods"]) {
    const std::string m = As<std::string>(n, "methods");
    if (m == "baseline") c.methods = MethodSet::kBaseline;
    else if (m == "proposed") c.methods = MethodSet::kProposed;
    else if (m == "both") c.methods = MethodSet::kBoth;
    else throw ConfigError("methods must be baseline, proposed or both");
  }
  if (auto n = root["targets"]) {
    if (!n.IsSequence()) throw ParseError("config: targets must be a list", LineOf(n));
    c.targets.clear();
    for (const auto& t : n) c.targets.push_back(As<double>(t, "targets"));
  }
  if (auto n = root["models"]) {
    if (!n.IsSequence()) throw ParseError("config: models must be a list", LineOf(n));
    c.models.clear();
    for (std::size_t i = 0; i < n.size(); ++i) {
      const YAML::Node m = n[i];
      const std::string where = "models[" + std::to_string(i) + "]";
      if (!m.IsMap()) throw ParseError("config: " + where + " must be a mapping", LineOf(m));
      CheckKeys(m, {"beta_train", "delta_min", "delta_max", "gain_scale"}, where + ": ");
      for (const char* key : {"beta_train", "delta_min", "delta_max", "gain_scale"}) {
        if (!m[key]) throw ConfigError(where + ": missing '" + key + "'");
      }
      c.models.push_back({As<double>(m["beta_train"], "beta_train"),
                          As<double>(m["delta_min"], "delta_min"),
                          As<double>(m["delta_max"], "delta_max"),
                          As<double>(m["gain_scale"], "gain_scale")});
    }
  }
  if (auto n = root["search"]) {
    if (!n.IsMap()) throw ParseError("config: search must be a mapping", LineOf(n));
    CheckKeys(n, {"refit", "binary_max_iters", "loglinear_max_iters"}, "search: ");
    if (auto r = n["refit"]) {
      const std::string mode = As<std::string>(r, "refit");
      if (mode == "anchor_min") c.search.refit = RefitMode::kAnchorMin;
      else if (mode == "bracketing") c.search.refit = RefitMode::kBracketing;
      else throw ConfigError("search.refit must be anchor_min or bracketing");
    }
    if (auto v = n["binary_max_iters"]) c.search.binary_max_iters = As<int>(v, "binary_max_iters");
    if (auto v = n["loglinear_max_iters"]) {
      c.search.loglinear_max_iters = As<int>(v, "loglinear_max_iters");
    }
  }
  if (auto n = root["oracle_grid"]) c.oracle_grid = As<int>(n, "oracle_grid");
  if (auto n = root["sweep_points"]) c.sweep_points = As<int>(n, "sweep_points");
  if (auto n = root["seed"]) c.seed = As<uint64_t>(n, "seed");
  if (auto n = root["synthetic_curves"]) c.synthetic_curves = As<int>(n, "synthetic_curves");
  if (auto n = root["workers"]) c.workers = As<int>(n, "workers");
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

}  // namespace brm
