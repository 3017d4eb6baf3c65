// Copyright 2026 The ctcst Authors
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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcst/model.hpp"
#include "ctcst/serialize.hpp"

namespace ctcst {

inline constexpr const char* kCheckpointFormatVersion = "ctcst-ckpt-v1";

// Versioned container: JSON header (model config, optimizer hyperparameters
// and step count, tensor index, caller metadata) followed by the tensors as
// row-major little-endian float32. Tensor bytes and header text depend only
// on the stored values, so save -> load -> save round-trips byte-identically.
template <typename S>
struct Checkpoint {
  ModelConfig model_cfg;
  AcousticModel<S> model;
  AdamState<S> opt;
  nlohmann::json extra;
  std::optional<ParamSet<S>> best_params;  // present when a best snapshot was saved
};

template <typename S>
void save_checkpoint(const AcousticModel<S>& model, const AdamState<S>& opt,
                     const std::string& path, const nlohmann::json& extra = nlohmann::json::object(),
                     const ParamSet<S>* best_params = nullptr) {
  std::vector<std::pair<std::string, const Mat<S>*>> tensors;
  model.params().for_each([&](const std::string& name, const Mat<S>& m) {
    tensors.emplace_back("param/" + name, &m);
  });
  opt.m.for_each([&](const std::string& name, const Mat<S>& m) {
    tensors.emplace_back("adam_m/" + name, &m);
  });
  opt.v.for_each([&](const std::string& name, const Mat<S>& m) {
    tensors.emplace_back("adam_v/" + name, &m);
  });
  if (best_params) {
    best_params->for_each([&](const std::string& name, const Mat<S>& m) {
      tensors.emplace_back("best/" + name, &m);
    });
  }

  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, mat] : tensors)
    index.push_back({{"name", name}, {"rows", mat->rows()}, {"cols", mat->cols()}});

  nlohmann::json header = {{"version", kCheckpointFormatVersion},
                           {"model", model.config().to_json()},
                           {"optimizer", opt.cfg.to_json()},
                           {"step", opt.step},
                           {"tensors", index},
                           {"extra", extra}};

  auto os = io::open_output(path);
  io::write_header(os, header);
  for (const auto& [name, mat] : tensors)
    for (std::size_t i = 0; i < mat->size(); ++i)
      io::write_f32(os, static_cast<float>(mat->data()[i]));
  require(os.good(), "save_checkpoint: write failed for " + path);
}

template <typename S = float>
Checkpoint<S> load_checkpoint(const std::string& path) {
  auto is = io::open_input(path);
  io::Reader r(is, "checkpoint '" + path + "'");
  const nlohmann::json header = io::read_header(r, kCheckpointFormatVersion);

  Checkpoint<S> ckpt;
  try {
    ckpt.model_cfg = ModelConfig::from_json(header.at("model"));
    ckpt.model_cfg.validate();
    ckpt.model = AcousticModel<S>(ckpt.model_cfg, 0);
    ckpt.opt = AdamState<S>(AdamConfig::from_json(header.at("optimizer")), ckpt.model_cfg);
    ckpt.opt.step = header.at("step").get<long>();
    ckpt.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(r.context() + ": malformed header: " + e.what());
  }

  std::map<std::string, Mat<S>*> slots;
  ckpt.model.params().for_each(
      [&](const std::string& name, Mat<S>& m) { slots["param/" + name] = &m; });
  ckpt.opt.m.for_each([&](const std::string& name, Mat<S>& m) { slots["adam_m/" + name] = &m; });
  ckpt.opt.v.for_each([&](const std::string& name, Mat<S>& m) { slots["adam_v/" + name] = &m; });
  ParamSet<S> best = ParamSet<S>::shaped(ckpt.model_cfg);
  bool saw_best = false;
  best.for_each([&](const std::string& name, Mat<S>& m) { slots["best/" + name] = &m; });

  std::map<std::string, bool> filled;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const int rows = entry.at("rows").get<int>();
    const int cols = entry.at("cols").get<int>();
    r.set_context("checkpoint '" + path + "' tensor '" + name + "'");
    auto it = slots.find(name);
    require(it != slots.end(), r.context() + ": unknown tensor for declared model config");
    require(it->second->rows() == rows && it->second->cols() == cols,
            r.context() + ": shape mismatch against declared model config");
    require(!filled[name], r.context() + ": duplicate tensor");
    filled[name] = true;
    if (name.starts_with("best/")) saw_best = true;
    for (std::size_t i = 0; i < it->second->size(); ++i)
      it->second->data()[i] = static_cast<S>(r.f32());
  }
  r.set_context("checkpoint '" + path + "'");
  require(r.at_eof(), r.context() + ": trailing bytes after tensors");
  for (const auto& [name, slot] : slots) {
    (void)slot;
    if (!name.starts_with("best/"))
      require(filled[name], r.context() + ": missing tensor " + name);
  }
  if (saw_best) {
    best.for_each([&](const std::string& name, Mat<S>&) {
      require(filled["best/" + name], r.context() + ": incomplete best-snapshot tensors");
    });
    ckpt.best_params = std::move(best);
  }
  ckpt.model.bump_revision();
  return ckpt;
}

}  // namespace ctcst
