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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctcst/experiment.hpp"

using namespace ctcst;
namespace fs = std::filesystem;

namespace {

ExperimentConfig micro_config(Regime regime) {
  ExperimentConfig cfg = preset_config("smoke");
  cfg.regime = regime;
  cfg.epochs_base = 2;
  cfg.epochs_semi = 2;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// Learning-curve CSV with the wall-clock column masked out.
std::string csv_without_timing(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream out;
  std::string line;
  while (std::getline(is, line)) {
    const auto cut = line.rfind(',');
    out << line.substr(0, cut) << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("config JSON round-trips through to_json/from_json") {
  ExperimentConfig cfg = preset_config("selftrain-g1-w1");
  cfg.lr_semi = 0.00042;
  cfg.dropout_semi = 0.15;
  cfg.base_checkpoint = "somewhere.ckpt";
  const ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.objective.gamma == 1.0);
  CHECK(back.effective_lr_semi() == 0.00042);
}

TEST_CASE("unknown presets are rejected") {
  CHECK_THROWS_WITH_AS(preset_config("definitely-not-real"), doctest::Contains("preset"), Error);
}

TEST_CASE("supervised run writes the full artifact set") {
  const fs::path dir = fresh_dir("ctcst_exp_base");
  const RunSummary summary = run_experiment(micro_config(Regime::supervised), dir.string());
  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "learning_curve.csv"));
  CHECK(fs::exists(dir / "best.ckpt"));
  CHECK(fs::exists(dir / "eval_dev.json"));
  CHECK(fs::exists(dir / "eval_test.json"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK_FALSE(fs::exists(dir / "FAILED"));
  CHECK(summary.best_dev_error >= 0.0);
  REQUIRE(summary.test_error.has_value());
  fs::remove_all(dir);
}

TEST_CASE("self-training run trains and stores its base system") {
  const fs::path dir = fresh_dir("ctcst_exp_self");
  const RunSummary summary = run_experiment(micro_config(Regime::self_training), dir.string());
  CHECK(fs::exists(dir / "base.ckpt"));
  CHECK(fs::exists(dir / "base_curve.csv"));
  CHECK(fs::exists(dir / "learning_curve.csv"));
  CHECK(summary.base_state.has_value());
  // The stored base checkpoint is reusable as-is.
  ExperimentConfig reuse = micro_config(Regime::one_shot);
  reuse.base_checkpoint = (dir / "base.ckpt").string();
  const fs::path dir2 = fresh_dir("ctcst_exp_oneshot");
  const RunSummary second = run_experiment(reuse, dir2.string());
  CHECK_FALSE(fs::exists(dir2 / "base.ckpt"));  // reused, not retrained
  CHECK(second.best_dev_error >= 0.0);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("reruns with equal config and seeds are identical modulo wall clock") {
  const fs::path a = fresh_dir("ctcst_exp_rep_a");
  const fs::path b = fresh_dir("ctcst_exp_rep_b");
  const ExperimentConfig cfg = micro_config(Regime::self_training);
  (void)run_experiment(cfg, a.string());
  (void)run_experiment(cfg, b.string());
  CHECK(csv_without_timing(a / "learning_curve.csv") ==
        csv_without_timing(b / "learning_curve.csv"));
  CHECK(csv_without_timing(a / "base_curve.csv") == csv_without_timing(b / "base_curve.csv"));
  CHECK(slurp(a / "eval_dev.json") == slurp(b / "eval_dev.json"));
  CHECK(slurp(a / "eval_test.json") == slurp(b / "eval_test.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweeps validate their parameter and values") {
  const ExperimentConfig cfg = micro_config(Regime::self_training);
  CHECK_THROWS_WITH_AS(sweep_experiment(cfg, "momentum", {0.1}, "unused"),
                       doctest::Contains("param"), Error);
  CHECK_THROWS_WITH_AS(sweep_experiment(cfg, "gamma", {}, "unused"), doctest::Contains("empty"),
                       Error);
  CHECK_THROWS_WITH_AS(
      sweep_experiment(micro_config(Regime::supervised), "gamma", {0.5}, "unused"),
      doctest::Contains("semi-supervised"), Error);
}

TEST_CASE("a gamma sweep shares one base system and writes a summary") {
  const fs::path dir = fresh_dir("ctcst_exp_sweep");
  const auto summaries =
      sweep_experiment(micro_config(Regime::self_training), "gamma", {0.0, 1.0}, dir.string());
  REQUIRE(summaries.size() == 2);
  CHECK(fs::exists(dir / "base.ckpt"));
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK(fs::exists(dir / "gamma=0" / "learning_curve.csv"));
  CHECK(fs::exists(dir / "gamma=1" / "learning_curve.csv"));
  // gamma = 0 runs never report an unsupervised loss component.
  std::ifstream is(dir / "gamma=0" / "learning_curve.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  const auto first = row.find(',');
  const auto second = row.find(',', first + 1);
  const auto third = row.find(',', second + 1);
  CHECK(row.substr(third + 1, 1) == ",");  // empty unsup_loss field

  const std::string report = report_runs(dir.string());
  CHECK(report.find("gamma=0") != std::string::npos);
  CHECK(report.find("gamma=1") != std::string::npos);
  CHECK(report.find("gamma=0") < report.find("gamma=1"));  // sorted by value
  fs::remove_all(dir);
}

TEST_CASE("report marks missing artifacts instead of failing") {
  const fs::path dir = fresh_dir("ctcst_exp_report");
  fs::create_directories(dir / "broken_run");
  {
    std::ofstream os(dir / "broken_run" / "config.json");
    os << R"({"regime":"supervised"})";
  }
  const std::string report = report_runs(dir.string());
  CHECK(report.find("broken_run") != std::string::npos);
  CHECK(report.find("summary.json") != std::string::npos);
  CHECK(report.find("missing") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("invalid configurations fail before any compute") {
  ExperimentConfig cfg = micro_config(Regime::self_training);
  cfg.objective.gamma = -1.0;
  const fs::path dir = fresh_dir("ctcst_exp_invalid");
  CHECK_THROWS_AS(run_experiment(cfg, dir.string()), Error);
  fs::remove_all(dir);
}
