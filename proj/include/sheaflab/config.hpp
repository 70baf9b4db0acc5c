// Copyright 2026 The sheaflab Authors.
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "sheaflab/error.hpp"
#include "sheaflab/train.hpp"

namespace sheaflab {

namespace detail {

template <class T>
T config_value(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Overlays the keys of a JSON object onto `cfg`. Unknown keys are rejected.
inline TrainConfig apply_config(TrainConfig cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "d") cfg.d = detail::config_value<Eigen::Index>(v, key);
    else if (key == "f") cfg.f = detail::config_value<Eigen::Index>(v, key);
    else if (key == "layers") cfg.layers = detail::config_value<int>(v, key);
    else if (key == "hidden") cfg.hidden = detail::config_value<Eigen::Index>(v, key);
    else if (key == "lr") cfg.lr = detail::config_value<double>(v, key);
    else if (key == "epochs") cfg.epochs = detail::config_value<int>(v, key);
    else if (key == "weight_decay") cfg.weight_decay = detail::config_value<double>(v, key);
    else if (key == "optimiser") cfg.optimiser = parse_optimiser(detail::config_value<std::string>(v, key));
    else if (key == "seed") cfg.seed = detail::config_value<std::uint64_t>(v, key);
    else if (key == "use_normalised") cfg.use_normalised = detail::config_value<bool>(v, key);
    else if (key == "patience") cfg.patience = detail::config_value<int>(v, key);
    else if (key == "activation") cfg.activation = parse_activation(detail::config_value<std::string>(v, key));
    else if (key == "tied_weights") cfg.tied_weights = detail::config_value<bool>(v, key);
    else if (key == "dropout") cfg.dropout = detail::config_value<double>(v, key);
    else throw UsageError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return apply_config(std::move(base), j);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"d", c.d},
          {"f", c.f},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"weight_decay", c.weight_decay},
          {"optimiser", to_string(c.optimiser)},
          {"seed", c.seed},
          {"use_normalised", c.use_normalised},
          {"patience", c.patience},
          {"activation", to_string(c.activation)},
          {"tied_weights", c.tied_weights},
          {"dropout", c.dropout}};
}

// Line-delimited metric records.

inline nlohmann::json epoch_record(const EpochRecord& e, std::size_t split) {
  return {{"record", "epoch"},         {"split", split},           {"epoch", e.epoch},
          {"train_loss", e.train_loss}, {"train_acc", e.train_acc}, {"val_acc", e.val_acc},
          {"test_acc", e.test_acc},     {"epoch_seconds", e.seconds}};
}

inline nlohmann::json summary_record(const TrainHistory& h, std::size_t split) {
  return {{"record", "summary"},
          {"split", split},
          {"best_val_epoch", h.best_epoch},
          {"best_val_acc", h.best_val_acc},
          {"test_acc", h.test_acc_at_best},
          {"sheaf_build_seconds", h.sheaf_build_seconds},
          {"mean_epoch_seconds", h.mean_epoch_seconds()}};
}

}  // namespace sheaflab
