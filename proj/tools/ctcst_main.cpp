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

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctcst/ctcst.hpp"

namespace {

ctcst::ExperimentConfig resolve_config(const std::string& preset, const std::string& config_path) {
  ctcst::ExperimentConfig cfg;
  if (!preset.empty()) cfg = ctcst::preset_config(preset);
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    ctcst::require(is.good(), "cannot open config: " + config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      ctcst::fail("config " + config_path + " is not valid JSON: " + e.what());
    }
    // A config file overlays the preset (or the defaults when no preset).
    nlohmann::json merged = cfg.to_json();
    merged.merge_patch(j);
    cfg = ctcst::ExperimentConfig::from_json(merged);
  }
  ctcst::require(!preset.empty() || !config_path.empty(), "need --config and/or --preset");
  return cfg;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctcst: semi-supervised CTC sequence recognition experiments"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir, param, values_csv, report_dir;
  std::string spec_path, corpus_out;
  std::uint64_t gen_seed = 1;

  auto* run = app.add_subcommand("run", "execute one configured experiment end to end");
  run->add_option("--config", config_path, "experiment config JSON");
  run->add_option("--preset", preset, "named preset (base, base-noaug, selftrain-g1-w1, "
                                      "selftrain-noaug-unsup, uda, one-shot, smoke)");
  run->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "one run per value of a hyperparameter");
  sweep->add_option("--config", config_path, "experiment config JSON");
  sweep->add_option("--preset", preset, "named preset to start from");
  sweep->add_option("--param", param, "gamma | W | dropout | lr")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--out", out_dir, "output directory");

  auto* report = app.add_subcommand("report", "consolidated table for finished runs");
  report->add_option("dir", report_dir, "run directory or parent of run directories")->required();

  auto* gen = app.add_subcommand("gen-corpus", "generate and save a synthetic corpus");
  gen->add_option("--spec", spec_path, "corpus spec JSON")->required();
  gen->add_option("--seed", gen_seed, "generation seed")->required();
  gen->add_option("--out", corpus_out, "output corpus file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ctcst::ExperimentConfig cfg = resolve_config(preset, config_path);
      if (out_dir.empty()) out_dir = cfg.output_dir;
      ctcst::require(!out_dir.empty(), "run: need --out or output_dir in the config");
      const auto summary = ctcst::run_experiment(cfg, out_dir);
      std::cout << "best dev token error " << summary.best_dev_error << " (epoch "
                << summary.best_epoch << ")";
      if (summary.test_error) std::cout << ", test " << *summary.test_error;
      std::cout << "\nartifacts in " << out_dir << "\n";
    } else if (sweep->parsed()) {
      ctcst::ExperimentConfig cfg = resolve_config(preset, config_path);
      if (out_dir.empty()) out_dir = cfg.output_dir;
      ctcst::require(!out_dir.empty(), "sweep: need --out or output_dir in the config");
      const auto summaries =
          ctcst::sweep_experiment(cfg, param, parse_values(values_csv), out_dir);
      std::cout << summaries.size() << " runs finished; summary in " << out_dir
                << "/summary.csv\n";
    } else if (report->parsed()) {
      const std::string table = ctcst::report_runs(report_dir);
      std::cout << table;
      std::ofstream csv(std::filesystem::path(report_dir) / "report.csv");
      if (csv.good()) csv << table;
    } else if (gen->parsed()) {
      std::ifstream is(spec_path);
      ctcst::require(is.good(), "cannot open spec: " + spec_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(is);
      } catch (const nlohmann::json::exception& e) {
        ctcst::fail("spec " + spec_path + " is not valid JSON: " + e.what());
      }
      const auto spec = ctcst::CorpusSpec::from_json(j);
      const ctcst::Corpus corpus = ctcst::generate_corpus(spec, gen_seed);
      ctcst::save_corpus(corpus, corpus_out);
      std::cout << "wrote " << corpus_out << " (" << corpus.supervised.size() << " sup, "
                << corpus.unsupervised.size() << " unsup, " << corpus.dev.size() << " dev, "
                << corpus.test.size() << " test)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
