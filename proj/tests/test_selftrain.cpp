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

#include "ctcst/selftrain.hpp"
#include "test_util.hpp"

using namespace ctcst;

namespace {

Corpus tiny_corpus(std::uint64_t seed = 101, int n_sup = 12, int n_uns = 16) {
  CorpusSpec spec;
  spec.vocab_size = 3;
  spec.feature_dim = 4;
  spec.label_len_min = 2;
  spec.label_len_max = 4;
  spec.frames_per_token_min = 2;
  spec.frames_per_token_max = 4;
  spec.noise_stddev = 0.4;
  spec.n_supervised = n_sup;
  spec.n_unsupervised = n_uns;
  spec.n_dev = 5;
  spec.n_test = 5;
  return normalize(generate_corpus(spec, seed));
}

ModelConfig model_for(const Corpus& corpus, double dropout = 0.0) {
  ModelConfig cfg;
  cfg.input_dim = corpus.spec.feature_dim * corpus.spec.stack_k;
  cfg.num_outputs = corpus.vocab.size();
  cfg.layers = 1;
  cfg.hidden = 8;
  cfg.dropout = dropout;
  return cfg;
}

SemiTrainConfig semi_config(int epochs = 2, double gamma = 1.0) {
  SemiTrainConfig cfg;
  cfg.objective.regime = Regime::self_training;
  cfg.objective.gamma = gamma;
  cfg.objective.beam_width = 1;
  cfg.objective.batch_supervised = 4;
  cfg.objective.batch_unsupervised = 8;
  cfg.optim.lr = 1e-3;
  cfg.epochs = epochs;
  cfg.train_seed = 77;
  return cfg;
}

Checkpoint<float> make_base(const Corpus& corpus, const std::string& tag, int epochs = 3) {
  SupervisedTrainConfig cfg;
  cfg.model = model_for(corpus);
  cfg.epochs = epochs;
  cfg.optim.lr = 4e-3;
  const TrainState state = train_supervised(corpus, cfg);
  const auto path = std::filesystem::temp_directory_path() / ("ctcst_base_" + tag + ".ckpt");
  save_train_state(state, path.string());
  Checkpoint<float> base = load_checkpoint<float>(path.string());
  std::filesystem::remove(path);
  return base;
}

}  // namespace

TEST_CASE("gamma=0 training is bit-identical to continued supervised training") {
  const Corpus corpus = tiny_corpus();
  const Checkpoint<float> base = make_base(corpus, "g0");

  SemiTrainConfig with_gamma0 = semi_config(/*epochs=*/20, /*gamma=*/0.0);
  SemiTrainConfig without_unsup = semi_config(/*epochs=*/20, /*gamma=*/1.0);
  without_unsup.objective.batch_unsupervised = 0;

  const TrainState a = train_self(corpus, base, with_gamma0);
  const TrainState b = train_self(corpus, base, without_unsup);
  // 12 sup / batch 4 = 3 steps per epoch; 20 epochs = 60 > 50 steps.
  CHECK(a.opt.step >= 50);
  CHECK(a.opt.step == b.opt.step);
  CHECK(a.model.params() == b.model.params());
  CHECK(a.best_dev_error == b.best_dev_error);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].dev_token_error == b.history[i].dev_token_error);
    CHECK(a.history[i].sup_loss == b.history[i].sup_loss);
    CHECK_FALSE(a.history[i].has_unsup);
  }
}

TEST_CASE("step report matches independently recomputed objective components") {
  const Corpus corpus = tiny_corpus(303);
  const Checkpoint<float> base = make_base(corpus, "eq1");
  SemiTrainConfig cfg = semi_config();
  cfg.objective.gamma = 0.7;

  AcousticModel<float> pre_model(base.model_cfg, 0);
  pre_model.params() = base.best_params ? *base.best_params : base.model.params();
  pre_model.bump_revision();

  SemiTrainer trainer(corpus, pre_model, AdamState<float>(cfg.optim, base.model_cfg), cfg);
  const std::vector<int> sup_idx{0, 3, 5, 7};
  const std::vector<int> uns_idx{1, 2, 4, 6, 8};
  const StepReport rep = trainer.step(sup_idx, uns_idx, /*epoch=*/1);

  // Recompute both sums from scratch with the pre-step parameters and the
  // published seed-derivation scheme (dropout is zero, so train == eval).
  const std::uint64_t sseed = step_seed(cfg.train_seed, rep.global_step);
  const int k = corpus.spec.stack_k;
  double sup_sum = 0.0;
  for (std::size_t pos = 0; pos < sup_idx.size(); ++pos) {
    const auto& utt = corpus.supervised[sup_idx[pos]];
    const auto variants =
        augment_supervised(utt, cfg.augment, sup_variant_seed(sseed, static_cast<int>(pos)));
    double utt_loss = 0.0;
    for (const auto& v : variants) {
      const auto logits = pre_model.forward(stack_frames(v.features, k), RunMode::eval, 0);
      const auto res = ctc_loss_grad(logits, v.labels, corpus.blank());
      REQUIRE(res.feasible);
      utt_loss += res.loss;
    }
    sup_sum += utt_loss / variants.size();
  }
  double unsup_sum = 0.0;
  int attempted_unsup = 0;
  for (std::size_t pos = 0; pos < uns_idx.size(); ++pos) {
    const auto& utt = corpus.unsupervised[uns_idx[pos]];
    const auto logits = pre_model.forward(stack_frames(utt.features, k), RunMode::eval, 0);
    const auto hyp = beam_decode(log_posteriors(logits), corpus.blank(), cfg.objective.beam_width);
    ++attempted_unsup;
    if (hyp.labels.empty()) continue;
    const auto pairs = augment_unsupervised(utt.features, hyp.labels, cfg.augment,
                                            unsup_variant_seed(sseed, static_cast<int>(pos)));
    double utt_loss = 0.0;
    for (const auto& p : pairs) {
      const auto vlogits = pre_model.forward(stack_frames(p.features, k), RunMode::eval, 0);
      const auto res = ctc_loss_grad(vlogits, p.labels, corpus.blank());
      if (res.feasible) utt_loss += res.loss;
    }
    unsup_sum += utt_loss / pairs.size();
  }

  CHECK(rep.sup_attempted == static_cast<int>(sup_idx.size()));
  CHECK(rep.unsup_attempted == attempted_unsup);
  CHECK(rep.sup_loss == doctest::Approx(sup_sum / sup_idx.size()).epsilon(1e-12));
  CHECK(rep.unsup_loss == doctest::Approx(unsup_sum / uns_idx.size()).epsilon(1e-12));
  CHECK(rep.total_loss() ==
        doctest::Approx(sup_sum / sup_idx.size() + 0.7 * unsup_sum / uns_idx.size())
            .epsilon(1e-12));
}

TEST_CASE("pseudo-labels are decoded fresh with the just-updated parameters") {
  const Corpus corpus = tiny_corpus(404);
  const Checkpoint<float> base = make_base(corpus, "fresh");
  SemiTrainConfig cfg = semi_config();

  AcousticModel<float> model(base.model_cfg, 0);
  model.params() = base.model.params();
  model.bump_revision();
  SemiTrainer trainer(corpus, model, AdamState<float>(cfg.optim, base.model_cfg), cfg);
  const std::vector<int> sup_idx{0, 1, 2, 3};
  const std::vector<int> uns_idx{0, 1, 2};
  for (long s = 0; s < 4; ++s) {
    const StepReport rep = trainer.step(sup_idx, uns_idx, 1);
    CHECK(rep.global_step == s);
    CHECK(rep.decoded);
    for (const auto& rec : rep.pseudo) {
      CHECK(rec.model_step == s);  // exactly the parameters after step s-1
      for (int l : rec.labels) CHECK(l != corpus.blank());
    }
  }
}

TEST_CASE("the trainer never reads hidden unsupervised labels") {
  const Corpus corpus = tiny_corpus(505);
  CHECK(corpus.oracle_read_count() == 0);
  const Checkpoint<float> base = make_base(corpus, "leak");
  CHECK(corpus.oracle_read_count() == 0);  // supervised phase reads nothing

  SemiTrainConfig cfg = semi_config(/*epochs=*/2);
  cfg.log_pseudo_oracle = false;  // disable the diagnostic: now zero reads allowed
  const TrainState state = train_self(corpus, base, cfg);
  CHECK(state.opt.step > 0);
  CHECK(corpus.oracle_read_count() == 0);

  // With the eval-privileged diagnostic on, reads happen, and they are
  // exactly the per-epoch oracle scoring - still nothing on the update path.
  SemiTrainConfig logged = semi_config(/*epochs=*/1);
  logged.log_pseudo_oracle = true;
  const TrainState state2 = train_self(corpus, base, logged);
  CHECK(state2.history.at(0).has_pseudo);
  CHECK(corpus.oracle_read_count() > 0);
}

TEST_CASE("a batch with no unsupervised utterances performs a pure supervised step") {
  const Corpus corpus = tiny_corpus(606);
  const Checkpoint<float> base = make_base(corpus, "nounsup");
  SemiTrainConfig cfg = semi_config();
  AcousticModel<float> model(base.model_cfg, 0);
  model.params() = base.model.params();
  model.bump_revision();
  SemiTrainer trainer(corpus, model, AdamState<float>(cfg.optim, base.model_cfg), cfg);
  const StepReport rep = trainer.step(std::vector<int>{0, 1}, std::vector<int>{}, 1);
  CHECK_FALSE(rep.decoded);
  CHECK(rep.unsup_attempted == 0);
  CHECK(rep.unsup_loss == 0.0);
  CHECK(rep.pseudo.empty());
}

TEST_CASE("empty pseudo-labels are skipped and counted, denominator unchanged") {
  const Corpus corpus = tiny_corpus(707);
  // A head that massively favors blank decodes every utterance to empty.
  ModelConfig mc = model_for(corpus);
  AcousticModel<float> model(mc, 9);
  model.params().b_out(corpus.blank(), 0) = 30.0f;
  model.bump_revision();

  SemiTrainConfig cfg = semi_config();
  SemiTrainer trainer(corpus, model, AdamState<float>(cfg.optim, mc), cfg);
  const std::vector<int> uns_idx{0, 1, 2, 3};
  const StepReport rep = trainer.step(std::vector<int>{0, 1}, uns_idx, 1);
  CHECK(rep.skipped_empty_pseudo == 4);
  CHECK(rep.unsup_loss == 0.0);  // all excluded from the numerator
  CHECK(rep.unsup_attempted == 4);
  for (const auto& rec : rep.pseudo) CHECK(rec.skipped);
}

TEST_CASE("uda loss at the soft-target parameters equals the posterior entropy") {
  const Corpus corpus = tiny_corpus(808);
  const Checkpoint<float> base = make_base(corpus, "uda");
  SemiTrainConfig cfg = semi_config();
  cfg.objective.regime = Regime::uda;
  cfg.objective.augment_unsupervised = false;  // no distortion: CE(q, q) = H(q)
  cfg.objective.gamma = 0.5;

  AcousticModel<float> model(base.model_cfg, 0);
  model.params() = base.model.params();
  model.bump_revision();
  SemiTrainer trainer(corpus, model, AdamState<float>(cfg.optim, base.model_cfg), cfg);
  const std::vector<int> uns_idx{0, 1, 2};
  const StepReport rep = trainer.step(std::vector<int>{0}, uns_idx, 1);

  double entropy_sum = 0.0;
  for (int idx : uns_idx) {
    const auto& utt = corpus.unsupervised[idx];
    const auto logits = model.forward(stack_frames(utt.features, corpus.spec.stack_k),
                                      RunMode::eval, 0);
    const MatD lp = log_softmax_rows(logits);
    for (int t = 0; t < lp.rows(); ++t)
      for (int c = 0; c < lp.cols(); ++c) entropy_sum -= std::exp(lp(t, c)) * lp(t, c);
  }
  CHECK(rep.unsup_loss == doctest::Approx(entropy_sum / uns_idx.size()).epsilon(1e-9));
  CHECK(rep.pseudo.empty());  // no discrete labels in UDA
}

TEST_CASE("one-shot with zero unsupervised batch reduces to continued supervised training") {
  const Corpus corpus = tiny_corpus(909);
  const Checkpoint<float> base = make_base(corpus, "oneshot0");
  SemiTrainConfig none = semi_config(/*epochs=*/3);
  none.objective.batch_unsupervised = 0;
  SemiTrainConfig continued = semi_config(/*epochs=*/3, /*gamma=*/0.0);
  const TrainState a = train_one_shot(corpus, base, none);
  const TrainState b = train_self(corpus, base, continued);
  CHECK(a.model.params() == b.model.params());
}

TEST_CASE("one-shot records keep the base model's step stamp across epochs") {
  // Aligned sizes (12/4 == 24/8 steps) so each split is consumed exactly
  // once per epoch and the frozen-label diagnostic is epoch-invariant.
  const Corpus corpus = tiny_corpus(1010, /*n_sup=*/12, /*n_uns=*/24);
  const Checkpoint<float> base = make_base(corpus, "oneshot");
  SemiTrainConfig cfg = semi_config(/*epochs=*/2);
  cfg.objective.beam_width = 4;
  const TrainState state = train_one_shot(corpus, base, cfg);
  REQUIRE(state.history.size() == 2);
  // Oracle diagnostic identical each epoch: labels never regenerate.
  CHECK(state.history[0].pseudo_oracle_error ==
        doctest::Approx(state.history[1].pseudo_oracle_error));
}

TEST_CASE("training resumes bit-identically from a saved state") {
  namespace fs = std::filesystem;
  const Corpus corpus = tiny_corpus(1111);
  SupervisedTrainConfig sup;
  sup.model = model_for(corpus);
  sup.optim.lr = 4e-3;

  SUBCASE("supervised phase") {
    sup.epochs = 6;
    const TrainState straight = train_supervised(corpus, sup);

    sup.epochs = 3;
    const TrainState half = train_supervised(corpus, sup);
    const auto path = fs::temp_directory_path() / "ctcst_resume_sup.ckpt";
    save_train_state(half, path.string());
    const TrainState reloaded = load_train_state(path.string());
    fs::remove(path);
    sup.epochs = 6;
    const TrainState resumed = train_supervised(corpus, sup, &reloaded);

    CHECK(resumed.model.params() == straight.model.params());
    CHECK(resumed.best_dev_error == straight.best_dev_error);
    CHECK(resumed.best_params == straight.best_params);
    REQUIRE(resumed.history.size() == straight.history.size());
    for (std::size_t i = 0; i < straight.history.size(); ++i)
      CHECK(resumed.history[i].dev_token_error == straight.history[i].dev_token_error);
  }

  SUBCASE("self-training phase") {
    sup.epochs = 2;
    const TrainState base_state = train_supervised(corpus, sup);
    const auto base_path = fs::temp_directory_path() / "ctcst_resume_base.ckpt";
    save_train_state(base_state, base_path.string());
    const Checkpoint<float> base = load_checkpoint<float>(base_path.string());
    fs::remove(base_path);

    SemiTrainConfig cfg = semi_config(/*epochs=*/4);
    const TrainState straight = train_self(corpus, base, cfg);

    cfg.epochs = 2;
    const TrainState half = train_self(corpus, base, cfg);
    const auto path = fs::temp_directory_path() / "ctcst_resume_semi.ckpt";
    save_train_state(half, path.string());
    const TrainState reloaded = load_train_state(path.string());
    fs::remove(path);
    cfg.epochs = 4;
    const TrainState resumed = train_self(corpus, base, cfg, &reloaded);

    CHECK(resumed.model.params() == straight.model.params());
    CHECK(resumed.best_dev_error == straight.best_dev_error);
  }
}

TEST_CASE("learning-curve CSV has the required columns and blanks for absent values") {
  std::vector<EpochStats> history(2);
  history[0].epoch = 1;
  history[0].step = 3;
  history[0].sup_loss = 1.5;
  history[0].dev_token_error = 0.5;
  history[0].seconds_per_update = 0.001;
  history[1] = history[0];
  history[1].epoch = 2;
  history[1].has_unsup = true;
  history[1].unsup_loss = 2.25;
  history[1].has_pseudo = true;
  history[1].pseudo_oracle_error = 0.125;

  const auto path = std::filesystem::temp_directory_path() / "ctcst_curve.csv";
  write_learning_curve_csv(history, path.string());
  std::ifstream is(path);
  std::string header, row1, row2;
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  std::filesystem::remove(path);
  CHECK(header ==
        "epoch,step,sup_loss,unsup_loss,dev_token_error,pseudo_label_oracle_error,"
        "seconds_per_update");
  CHECK(row1 == "1,3,1.5,,0.5,,0.001");
  CHECK(row2 == "2,3,1.5,2.25,0.5,0.125,0.001");
}

TEST_CASE("mismatched base checkpoints are rejected with a structured error") {
  const Corpus corpus = tiny_corpus(1212);
  ModelConfig wrong = model_for(corpus);
  wrong.num_outputs = corpus.vocab.size() + 2;
  Checkpoint<float> base;
  base.model_cfg = wrong;
  base.model = AcousticModel<float>(wrong, 1);
  base.opt = AdamState<float>(AdamConfig{}, wrong);
  CHECK_THROWS_WITH_AS(train_self(corpus, base, semi_config()),
                       doctest::Contains("vocabulary"), Error);
}
