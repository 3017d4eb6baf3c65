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

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcst/augment.hpp"
#include "ctcst/checkpoint.hpp"
#include "ctcst/corpus.hpp"
#include "ctcst/ctc.hpp"
#include "ctcst/decode.hpp"
#include "ctcst/eval.hpp"
#include "ctcst/model.hpp"

namespace ctcst {

enum class Regime { supervised, self_training, uda, one_shot };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::supervised: return "supervised";
    case Regime::self_training: return "self_training";
    case Regime::uda: return "uda";
    case Regime::one_shot: return "one_shot";
  }
  return "?";
}

inline Regime regime_from_name(const std::string& name) {
  for (Regime r : {Regime::supervised, Regime::self_training, Regime::uda, Regime::one_shot})
    if (name == regime_name(r)) return r;
  fail("unknown regime: " + name);
}

// The semi-supervised objective: total = (1/N_l) sum L_ctc(sup) +
// (gamma/N_u) sum L_ctc(unsup, pseudo). N_l and N_u count attempted
// utterances and stay fixed even when individual utterances are skipped.
struct ObjectiveConfig {
  Regime regime = Regime::self_training;
  double gamma = 1.0;
  int beam_width = 1;           // pseudo-label decoding; one_shot default is 20
  int batch_supervised = 8;
  int batch_unsupervised = 32;
  bool augment_unsupervised = true;

  void validate() const {
    require(gamma >= 0.0, "objective: gamma must be >= 0");
    require(beam_width >= 1, "objective: beam width must be >= 1");
    require(batch_supervised >= 0 && batch_unsupervised >= 0,
            "objective: batch sizes must be >= 0");
    require(batch_supervised + batch_unsupervised > 0, "objective: empty batches");
  }

  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;

  nlohmann::json to_json() const {
    return {{"regime", regime_name(regime)},
            {"gamma", gamma},
            {"beam_width", beam_width},
            {"batch_supervised", batch_supervised},
            {"batch_unsupervised", batch_unsupervised},
            {"augment_unsupervised", augment_unsupervised}};
  }
  static ObjectiveConfig from_json(const nlohmann::json& j) {
    ObjectiveConfig c;
    if (j.contains("regime")) c.regime = regime_from_name(j["regime"].get<std::string>());
    c.gamma = j.value("gamma", c.gamma);
    c.beam_width = j.value("beam_width", c.beam_width);
    c.batch_supervised = j.value("batch_supervised", c.batch_supervised);
    c.batch_unsupervised = j.value("batch_unsupervised", c.batch_unsupervised);
    c.augment_unsupervised = j.value("augment_unsupervised", c.augment_unsupervised);
    return c;
  }
};

struct PseudoLabelRecord {
  std::string utterance_id;
  std::vector<int> labels;  // no blanks; empty only when skipped
  double log_score = 0.0;
  int epoch = 0;
  long model_step = 0;  // optimizer step count of the decoding parameters
  bool skipped = false;
};

struct EpochStats {
  int epoch = 0;
  long step = 0;  // global update count at end of epoch
  double sup_loss = 0.0;
  double unsup_loss = 0.0;
  bool has_unsup = false;
  double dev_token_error = 0.0;
  double pseudo_oracle_error = 0.0;
  bool has_pseudo = false;
  double seconds_per_update = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch}, {"step", step}, {"sup_loss", sup_loss},
            {"unsup_loss", unsup_loss}, {"has_unsup", has_unsup},
            {"dev_token_error", dev_token_error},
            {"pseudo_oracle_error", pseudo_oracle_error}, {"has_pseudo", has_pseudo},
            {"seconds_per_update", seconds_per_update}};
  }
  static EpochStats from_json(const nlohmann::json& j) {
    EpochStats s;
    s.epoch = j.at("epoch").get<int>();
    s.step = j.at("step").get<long>();
    s.sup_loss = j.at("sup_loss").get<double>();
    s.unsup_loss = j.at("unsup_loss").get<double>();
    s.has_unsup = j.at("has_unsup").get<bool>();
    s.dev_token_error = j.at("dev_token_error").get<double>();
    s.pseudo_oracle_error = j.at("pseudo_oracle_error").get<double>();
    s.has_pseudo = j.at("has_pseudo").get<bool>();
    s.seconds_per_update = j.at("seconds_per_update").get<double>();
    return s;
  }
};

struct TrainState {
  AcousticModel<float> model;
  AdamState<float> opt;
  int epoch = 0;
  std::vector<EpochStats> history;
  ParamSet<float> best_params;
  double best_dev_error = kPosInf;
  int best_epoch = -1;
  long skipped_infeasible = 0;
  long skipped_empty_pseudo = 0;

  AcousticModel<float> best_model() const {
    AcousticModel<float> m(model.config(), 0);
    m.params() = best_epoch >= 0 ? best_params : model.params();
    m.bump_revision();
    return m;
  }
};

// Learning-curve CSV. Absent quantities (e.g. unsupervised loss in a
// supervised run) are left as empty fields.
inline void write_learning_curve_csv(const std::vector<EpochStats>& history,
                                     const std::string& path) {
  auto os = io::open_output(path);
  os << "epoch,step,sup_loss,unsup_loss,dev_token_error,pseudo_label_oracle_error,"
        "seconds_per_update\n";
  for (const auto& row : history) {
    os << row.epoch << ',' << row.step << ',';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", row.sup_loss);
    os << buf << ',';
    if (row.has_unsup) {
      std::snprintf(buf, sizeof(buf), "%.9g", row.unsup_loss);
      os << buf;
    }
    os << ',';
    std::snprintf(buf, sizeof(buf), "%.9g", row.dev_token_error);
    os << buf << ',';
    if (row.has_pseudo) {
      std::snprintf(buf, sizeof(buf), "%.9g", row.pseudo_oracle_error);
      os << buf;
    }
    os << ',';
    std::snprintf(buf, sizeof(buf), "%.6g", row.seconds_per_update);
    os << buf << '\n';
  }
  require(os.good(), "write failed: " + path);
}

// Seed derivation for one training step. Public so tests can rebuild the
// exact augmentation and dropout streams a step used.
inline std::uint64_t step_seed(std::uint64_t train_seed, long global_step) {
  return derive_seed(train_seed, 0x73746570ULL, static_cast<std::uint64_t>(global_step));
}
inline std::uint64_t sup_variant_seed(std::uint64_t sseed, int position) {
  return derive_seed(sseed, 1, static_cast<std::uint64_t>(position));
}
inline std::uint64_t unsup_variant_seed(std::uint64_t sseed, int position) {
  return derive_seed(sseed, 2, static_cast<std::uint64_t>(position));
}
inline std::uint64_t forward_dropout_seed(std::uint64_t sseed, int role, int position,
                                          int variant) {
  return derive_seed(sseed, 3, static_cast<std::uint64_t>(role),
                     static_cast<std::uint64_t>(position), static_cast<std::uint64_t>(variant));
}

struct StepReport {
  long global_step = 0;   // step index before this update
  double sup_loss = 0.0;    // (1/N_l) sum of per-utterance mean CTC losses
  double unsup_loss = 0.0;  // (1/N_u) sum, before the gamma discount
  double gamma = 0.0;
  int sup_attempted = 0;
  int unsup_attempted = 0;
  int skipped_infeasible = 0;
  int skipped_empty_pseudo = 0;
  bool decoded = false;  // whether pseudo-label decoding ran this step
  std::vector<PseudoLabelRecord> pseudo;

  double total_loss() const { return sup_loss + gamma * unsup_loss; }
};

struct SupervisedTrainConfig {
  ModelConfig model;
  AdamConfig optim;
  AugmentConfig augment;
  int batch_size = 4;
  int eval_beam_width = 20;
  int epochs = 40;
  std::uint64_t init_seed = 1;
  std::uint64_t train_seed = 2;
};

struct SemiTrainConfig {
  ObjectiveConfig objective;
  AdamConfig optim;  // typically 5x smaller lr than the base phase
  AugmentConfig augment;
  std::optional<double> dropout;  // overrides the base model's rate if set
  int eval_beam_width = 20;
  int epochs = 30;
  std::uint64_t train_seed = 3;
  bool log_pseudo_oracle = true;  // eval-module diagnostic; off proves zero oracle reads
};

namespace train_detail {

inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

template <typename S>
void accumulate_scaled_backward(const AcousticModel<S>& model,
                                const typename AcousticModel<S>::Tape& tape,
                                const Mat<S>& grad_logits, double weight, ParamSet<S>& grads) {
  Mat<S> scaled(grad_logits.rows(), grad_logits.cols());
  for (std::size_t i = 0; i < grad_logits.size(); ++i)
    scaled.data()[i] = static_cast<S>(weight * static_cast<double>(grad_logits.data()[i]));
  grads.axpy(1.0, model.backward(tape, scaled));
}

}  // namespace train_detail

// Holds everything one semi-supervised update needs. The trainer loops own
// one of these; step-level tests can drive it directly.
class SemiTrainer {
 public:
  SemiTrainer(const Corpus& corpus, AcousticModel<float> model, AdamState<float> opt,
              SemiTrainConfig cfg)
      : corpus_(&corpus), model_(std::move(model)), opt_(std::move(opt)), cfg_(std::move(cfg)) {
    cfg_.objective.validate();
    cfg_.augment.validate();
    require(model_.config().num_outputs == corpus.vocab.size(),
            "semi trainer: model output count does not match vocabulary size");
    require(model_.config().input_dim == corpus.spec.feature_dim * corpus.spec.stack_k,
            "semi trainer: model input width does not match stacked features");
  }

  const AcousticModel<float>& model() const { return model_; }
  AcousticModel<float>& model() { return model_; }
  const AdamState<float>& opt() const { return opt_; }
  AdamState<float>& opt() { return opt_; }
  const SemiTrainConfig& config() const { return cfg_; }

  // One-shot regime: decode the whole unsupervised split once with the
  // given (base) parameters and freeze those labels.
  void freeze_pseudo_labels(const AcousticModel<float>& decode_model) {
    frozen_.clear();
    for (const auto& utt : corpus_->unsupervised) {
      PseudoLabelRecord rec = decode_clean(decode_model, utt);
      rec.skipped = rec.labels.empty();
      frozen_.emplace(utt.id, std::move(rec));
    }
    use_frozen_ = true;
  }

  bool frozen() const { return use_frozen_; }

  // (1) decode clean unsupervised features with the current model,
  // (2) build augmented training pairs sharing that pseudo-label,
  // (3) combine the two discounted CTC sums, (4) one optimizer step.
  StepReport step(std::span<const int> sup_indices, std::span<const int> unsup_indices,
                  int epoch) {
    StepReport rep;
    rep.global_step = opt_.step;
    rep.gamma = cfg_.objective.gamma;
    const std::uint64_t sseed = step_seed(cfg_.train_seed, opt_.step);
    const int stack_k = corpus_->spec.stack_k;
    const int blank = corpus_->blank();
    ParamSet<float> grads = ParamSet<float>::shaped(model_.config());

    // Supervised term.
    rep.sup_attempted = static_cast<int>(sup_indices.size());
    for (int pos = 0; pos < rep.sup_attempted; ++pos) {
      const Utterance& utt = corpus_->supervised[sup_indices[pos]];
      const auto variants =
          augment_supervised(utt, cfg_.augment, sup_variant_seed(sseed, pos));
      double utt_loss = 0.0;
      const int attempted = static_cast<int>(variants.size());
      for (int v = 0; v < attempted; ++v) {
        typename AcousticModel<float>::Tape tape;
        const MatF stacked = stack_frames(variants[v].features, stack_k);
        const MatF logits =
            model_.forward(stacked, RunMode::train, forward_dropout_seed(sseed, 0, pos, v), &tape);
        const auto res = ctc_loss_grad(logits, variants[v].labels, blank);
        if (!res.feasible) {
          ++rep.skipped_infeasible;
          continue;
        }
        utt_loss += res.loss;
        const double weight = 1.0 / (static_cast<double>(rep.sup_attempted) * attempted);
        train_detail::accumulate_scaled_backward(model_, tape, res.grad_logits, weight, grads);
      }
      rep.sup_loss += utt_loss / std::max(1, attempted);
    }
    if (rep.sup_attempted > 0) rep.sup_loss /= rep.sup_attempted;

    // Unsupervised term; skipped entirely in the degenerate gamma = 0 /
    // empty-batch cases (no decoding happens at all).
    rep.unsup_attempted = static_cast<int>(unsup_indices.size());
    const bool use_unsup = cfg_.objective.gamma > 0.0 && rep.unsup_attempted > 0;
    if (use_unsup) {
      if (cfg_.objective.regime == Regime::uda) {
        unsup_uda(unsup_indices, sseed, grads, rep);
      } else {
        unsup_pseudo_label(unsup_indices, sseed, epoch, grads, rep);
      }
      rep.unsup_loss /= rep.unsup_attempted;
    } else {
      rep.unsup_attempted = 0;
    }

    adam_step(model_, opt_, grads);
    return rep;
  }

 private:
  PseudoLabelRecord decode_clean(const AcousticModel<float>& model, const Utterance& utt) const {
    const MatF stacked = stack_frames(utt.features, corpus_->spec.stack_k);
    const MatF logits = model.forward(stacked, RunMode::eval, 0);
    const Hypothesis hyp =
        beam_decode(log_posteriors(logits), corpus_->blank(), cfg_.objective.beam_width);
    PseudoLabelRecord rec;
    rec.utterance_id = utt.id;
    rec.labels = hyp.labels;
    rec.log_score = hyp.log_score;
    rec.model_step = opt_.step;
    return rec;
  }

  void unsup_pseudo_label(std::span<const int> unsup_indices, std::uint64_t sseed, int epoch,
                          ParamSet<float>& grads, StepReport& rep) {
    const int stack_k = corpus_->spec.stack_k;
    const int blank = corpus_->blank();
    const int n_u = static_cast<int>(unsup_indices.size());
    for (int pos = 0; pos < n_u; ++pos) {
      const Utterance& utt = corpus_->unsupervised[unsup_indices[pos]];
      PseudoLabelRecord rec;
      if (use_frozen_) {
        rec = frozen_.at(utt.id);  // keeps its generation epoch and step stamp
      } else {
        rec = decode_clean(model_, utt);
        rec.epoch = epoch;
        rep.decoded = true;
      }
      if (rec.labels.empty()) {
        rec.skipped = true;
        ++rep.skipped_empty_pseudo;
        rep.pseudo.push_back(std::move(rec));
        continue;
      }
      // All speed variants of an utterance share the pseudo-label decoded
      // from its clean features.
      std::vector<TrainingPair> pairs;
      if (cfg_.objective.augment_unsupervised) {
        pairs = augment_unsupervised(utt.features, rec.labels, cfg_.augment,
                                     unsup_variant_seed(sseed, pos));
      } else {
        pairs.push_back(TrainingPair{utt.features, rec.labels});
      }
      double utt_loss = 0.0;
      const int attempted = static_cast<int>(pairs.size());
      for (int v = 0; v < attempted; ++v) {
        typename AcousticModel<float>::Tape tape;
        const MatF stacked = stack_frames(pairs[v].features, stack_k);
        const MatF logits =
            model_.forward(stacked, RunMode::train, forward_dropout_seed(sseed, 1, pos, v), &tape);
        const auto res = ctc_loss_grad(logits, pairs[v].labels, blank);
        if (!res.feasible) {
          ++rep.skipped_infeasible;
          continue;
        }
        utt_loss += res.loss;
        const double weight =
            cfg_.objective.gamma / (static_cast<double>(n_u) * attempted);
        train_detail::accumulate_scaled_backward(model_, tape, res.grad_logits, weight, grads);
      }
      rep.unsup_loss += utt_loss / attempted;
      rep.pseudo.push_back(std::move(rec));
    }
  }

  // UDA: per-frame cross entropy between the current model's output on the
  // distorted features and the pre-update parameters' posteriors on the
  // clean features, time-aligned by the speed-perturbation interpolation.
  // Soft targets are constants; the gradient per frame is p - q.
  void unsup_uda(std::span<const int> unsup_indices, std::uint64_t sseed, ParamSet<float>& grads,
                 StepReport& rep) {
    const int stack_k = corpus_->spec.stack_k;
    const int n_u = static_cast<int>(unsup_indices.size());
    for (int pos = 0; pos < n_u; ++pos) {
      const Utterance& utt = corpus_->unsupervised[unsup_indices[pos]];
      const MatF clean_stacked = stack_frames(utt.features, stack_k);
      const MatF clean_logits = model_.forward(clean_stacked, RunMode::eval, 0);
      const MatD soft_targets = softmax_rows(clean_logits);

      std::vector<MatF> variants;
      if (cfg_.objective.augment_unsupervised) {
        variants = augment_features(utt.features, cfg_.augment, unsup_variant_seed(sseed, pos));
      } else {
        variants.push_back(utt.features);
      }
      double utt_loss = 0.0;
      const int attempted = static_cast<int>(variants.size());
      for (int v = 0; v < attempted; ++v) {
        typename AcousticModel<float>::Tape tape;
        const MatF stacked = stack_frames(variants[v], stack_k);
        const MatF logits =
            model_.forward(stacked, RunMode::train, forward_dropout_seed(sseed, 1, pos, v), &tape);
        const MatD targets = resample_rows(soft_targets, stacked.rows());
        require(targets.rows() == logits.rows(),
                "uda: soft-target interpolation must match the variant frame count");
        const MatD lp = log_softmax_rows(logits);
        double ce = 0.0;
        MatF grad_logits(logits.rows(), logits.cols());
        for (int t = 0; t < logits.rows(); ++t) {
          for (int k = 0; k < logits.cols(); ++k) {
            ce -= targets(t, k) * lp(t, k);
            grad_logits(t, k) = static_cast<float>(std::exp(lp(t, k)) - targets(t, k));
          }
        }
        utt_loss += ce;
        const double weight = cfg_.objective.gamma / (static_cast<double>(n_u) * attempted);
        train_detail::accumulate_scaled_backward(model_, tape, grad_logits, weight, grads);
      }
      rep.unsup_loss += utt_loss / attempted;
    }
  }

  const Corpus* corpus_;
  AcousticModel<float> model_;
  AdamState<float> opt_;
  SemiTrainConfig cfg_;
  std::map<std::string, PseudoLabelRecord> frozen_;
  bool use_frozen_ = false;
};

namespace train_detail {

inline void record_epoch(TrainState& state, EpochStats row) {
  state.epoch = row.epoch;
  if (row.dev_token_error < state.best_dev_error) {
    state.best_dev_error = row.dev_token_error;
    state.best_epoch = row.epoch;
    state.best_params = state.model.params();
  }
  state.history.push_back(std::move(row));
}

}  // namespace train_detail

// Base system: supervised CTC training on the speed-perturbed + masked
// presentations (a 3x-larger effective set with the default factors),
// mini-batches over presentations, dev evaluation each epoch.
inline TrainState train_supervised(const Corpus& corpus, const SupervisedTrainConfig& cfg,
                                   const TrainState* resume = nullptr) {
  require(!corpus.supervised.empty(), "train_supervised: supervised split is empty");
  cfg.model.validate();
  cfg.optim.validate();
  cfg.augment.validate();
  require(cfg.batch_size >= 1, "train_supervised: batch size must be >= 1");

  TrainState state;
  if (resume) {
    state = *resume;
  } else {
    state.model = AcousticModel<float>(cfg.model, cfg.init_seed);
    state.opt = AdamState<float>(cfg.optim, cfg.model);
    state.best_params = state.model.params();
  }

  const int n_sup = static_cast<int>(corpus.supervised.size());
  const int n_variants = cfg.augment.variants();
  const int stack_k = corpus.spec.stack_k;
  const int blank = corpus.blank();

  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = train_detail::shuffled_indices(
        n_sup * n_variants, derive_seed(cfg.train_seed, 0xe70c8ULL, static_cast<std::uint64_t>(epoch)));
    double epoch_loss = 0.0;
    double epoch_seconds = 0.0;
    long epoch_updates = 0;
    long epoch_valid_utts = 0;

    for (int begin = 0; begin < static_cast<int>(order.size()); begin += cfg.batch_size) {
      const auto t0 = std::chrono::steady_clock::now();
      const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(order.size()));
      const int batch = end - begin;
      const std::uint64_t sseed = step_seed(cfg.train_seed, state.opt.step);
      ParamSet<float> grads = ParamSet<float>::shaped(cfg.model);
      double batch_loss = 0.0;
      int valid = 0;
      for (int pos = 0; pos < batch; ++pos) {
        const int presentation = order[begin + pos];
        const Utterance& utt = corpus.supervised[presentation / n_variants];
        const double factor = cfg.augment.speed_factors[presentation % n_variants];
        MatF warped = speed_perturb(utt.features, factor);
        warped = spectral_mask(warped, cfg.augment, sup_variant_seed(sseed, pos));
        typename AcousticModel<float>::Tape tape;
        const MatF stacked = stack_frames(warped, stack_k);
        const MatF logits =
            state.model.forward(stacked, RunMode::train, forward_dropout_seed(sseed, 0, pos, 0), &tape);
        const auto res = ctc_loss_grad(logits, *utt.labels, blank);
        if (!res.feasible) {
          ++state.skipped_infeasible;
          continue;
        }
        ++valid;
        batch_loss += res.loss;
        train_detail::accumulate_scaled_backward(state.model, tape, res.grad_logits,
                                                 1.0 / batch, grads);
      }
      if (valid == 0) continue;  // all-infeasible batch: logged and skipped
      epoch_valid_utts += valid;
      adam_step(state.model, state.opt, grads);
      epoch_loss += batch_loss / batch;
      ++epoch_updates;
      epoch_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    require(epoch_valid_utts > 0,
            "train_supervised: no feasible utterance in epoch " + std::to_string(epoch));

    EpochStats row;
    row.epoch = epoch;
    row.step = state.opt.step;
    row.sup_loss = epoch_updates > 0 ? epoch_loss / epoch_updates : 0.0;
    row.dev_token_error =
        evaluate(state.model, corpus, SplitId::dev, cfg.eval_beam_width).token_error_rate;
    row.seconds_per_update = epoch_updates > 0 ? epoch_seconds / epoch_updates : 0.0;
    train_detail::record_epoch(state, row);
  }
  return state;
}

namespace train_detail {

inline TrainState run_semi_phase(const Corpus& corpus, AcousticModel<float> base_model,
                                 const SemiTrainConfig& cfg, const TrainState* resume) {
  SemiTrainConfig effective = cfg;
  effective.objective.validate();
  if (cfg.dropout) {
    ModelConfig mc = base_model.config();
    mc.dropout = *cfg.dropout;
    mc.validate();
    AcousticModel<float> rebuilt(mc, 0);
    rebuilt.params() = base_model.params();
    rebuilt.bump_revision();
    base_model = std::move(rebuilt);
  }

  TrainState state;
  if (resume) {
    state = *resume;
  } else {
    state.model = base_model;
    state.opt = AdamState<float>(cfg.optim, state.model.config());
    state.best_params = state.model.params();
  }

  SemiTrainer trainer(corpus, state.model, state.opt, effective);
  // Frozen labels always come from the base parameters, also on resume.
  if (effective.objective.regime == Regime::one_shot) trainer.freeze_pseudo_labels(base_model);

  const int n_sup = static_cast<int>(corpus.supervised.size());
  const int n_uns = static_cast<int>(corpus.unsupervised.size());
  const int batch_l = effective.objective.batch_supervised;
  const int batch_u = effective.objective.batch_unsupervised;
  const bool use_unsup = effective.objective.gamma > 0.0 && batch_u > 0 && n_uns > 0;

  int steps_per_epoch = 0;
  if (batch_l > 0) steps_per_epoch = (n_sup + batch_l - 1) / batch_l;
  if (use_unsup) steps_per_epoch = std::max(steps_per_epoch, (n_uns + batch_u - 1) / batch_u);
  require(steps_per_epoch > 0, "semi phase: nothing to train on");

  for (int epoch = state.epoch + 1; epoch <= effective.epochs; ++epoch) {
    const auto sup_order = shuffled_indices(
        n_sup, derive_seed(effective.train_seed, 0x5510ULL, static_cast<std::uint64_t>(epoch)));
    const auto uns_order = shuffled_indices(
        n_uns, derive_seed(effective.train_seed, 0x0150ULL, static_cast<std::uint64_t>(epoch)));

    double sup_loss = 0.0, unsup_loss = 0.0, seconds = 0.0;
    long updates = 0;
    bool any_unsup = false;
    std::vector<PseudoLabelRecord> epoch_records;

    for (int s = 0; s < steps_per_epoch; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<int> sup_batch, uns_batch;
      if (batch_l > 0 && n_sup > 0) {
        for (int i = 0; i < batch_l; ++i)
          sup_batch.push_back(sup_order[(static_cast<std::size_t>(s) * batch_l + i) % n_sup]);
      }
      if (use_unsup) {
        for (int i = 0; i < batch_u; ++i)
          uns_batch.push_back(uns_order[(static_cast<std::size_t>(s) * batch_u + i) % n_uns]);
      }
      StepReport rep = trainer.step(sup_batch, uns_batch, epoch);
      sup_loss += rep.sup_loss;
      if (rep.unsup_attempted > 0) {
        unsup_loss += rep.unsup_loss;
        any_unsup = true;
      }
      state.skipped_infeasible += rep.skipped_infeasible;
      state.skipped_empty_pseudo += rep.skipped_empty_pseudo;
      for (auto& rec : rep.pseudo) epoch_records.push_back(std::move(rec));
      ++updates;
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    state.model = trainer.model();
    state.opt = trainer.opt();

    EpochStats row;
    row.epoch = epoch;
    row.step = state.opt.step;
    row.sup_loss = updates > 0 ? sup_loss / updates : 0.0;
    row.has_unsup = any_unsup;
    row.unsup_loss = any_unsup ? unsup_loss / updates : 0.0;
    row.dev_token_error =
        evaluate(state.model, corpus, SplitId::dev, effective.eval_beam_width).token_error_rate;
    if (effective.log_pseudo_oracle && !epoch_records.empty() && corpus.has_hidden_labels() &&
        effective.objective.regime != Regime::uda) {
      row.pseudo_oracle_error = pseudo_label_oracle_error(epoch_records, corpus).token_error_rate;
      row.has_pseudo = true;
    }
    row.seconds_per_update = updates > 0 ? seconds / updates : 0.0;
    record_epoch(state, row);
  }
  return state;
}

inline AcousticModel<float> base_model_for(const Corpus& corpus,
                                           const Checkpoint<float>& base) {
  require(base.model_cfg.num_outputs == corpus.vocab.size(),
          "base checkpoint: vocabulary size mismatch (checkpoint " +
              std::to_string(base.model_cfg.num_outputs) + " outputs, corpus needs " +
              std::to_string(corpus.vocab.size()) + ")");
  require(base.model_cfg.input_dim == corpus.spec.feature_dim * corpus.spec.stack_k,
          "base checkpoint: input width mismatch against stacked corpus features");
  // Continue from the best dev-error snapshot when available.
  AcousticModel<float> model(base.model_cfg, 0);
  model.params() = base.best_params ? *base.best_params : base.model.params();
  model.bump_revision();
  return model;
}

}  // namespace train_detail

// On-the-fly self-training: fresh pseudo-labels every step with the current
// model, Eq-style combined objective, dev-selected best snapshot.
inline TrainState train_self(const Corpus& corpus, const Checkpoint<float>& base,
                             const SemiTrainConfig& cfg, const TrainState* resume = nullptr) {
  SemiTrainConfig c = cfg;
  c.objective.regime = Regime::self_training;
  return train_detail::run_semi_phase(corpus, train_detail::base_model_for(corpus, base), c,
                                      resume);
}

// Soft-target consistency baseline; same loop, no decoding.
inline TrainState train_uda(const Corpus& corpus, const Checkpoint<float>& base,
                            const SemiTrainConfig& cfg, const TrainState* resume = nullptr) {
  SemiTrainConfig c = cfg;
  c.objective.regime = Regime::uda;
  return train_detail::run_semi_phase(corpus, train_detail::base_model_for(corpus, base), c,
                                      resume);
}

// Pseudo-labels generated once with the base model, then frozen.
inline TrainState train_one_shot(const Corpus& corpus, const Checkpoint<float>& base,
                                 const SemiTrainConfig& cfg, const TrainState* resume = nullptr) {
  SemiTrainConfig c = cfg;
  c.objective.regime = Regime::one_shot;
  return train_detail::run_semi_phase(corpus, train_detail::base_model_for(corpus, base), c,
                                      resume);
}

// Serialized trainer snapshot; resuming from it continues bit-identically
// with the uninterrupted run because every random stream is derived from
// (seed, epoch, step) rather than drawn from stateful generators.
inline void save_train_state(const TrainState& state, const std::string& path,
                             const nlohmann::json& extra_meta = nlohmann::json::object()) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& row : state.history) history.push_back(row.to_json());
  nlohmann::json extra = {{"epoch", state.epoch},
                          {"history", history},
                          {"best_dev_error", state.best_dev_error},
                          {"best_epoch", state.best_epoch},
                          {"skipped_infeasible", state.skipped_infeasible},
                          {"skipped_empty_pseudo", state.skipped_empty_pseudo},
                          {"meta", extra_meta}};
  save_checkpoint(state.model, state.opt, path, extra, &state.best_params);
}

inline TrainState load_train_state(const std::string& path) {
  Checkpoint<float> ckpt = load_checkpoint<float>(path);
  TrainState state;
  state.model = std::move(ckpt.model);
  state.opt = std::move(ckpt.opt);
  state.epoch = ckpt.extra.at("epoch").get<int>();
  state.best_dev_error = ckpt.extra.at("best_dev_error").get<double>();
  state.best_epoch = ckpt.extra.at("best_epoch").get<int>();
  state.skipped_infeasible = ckpt.extra.value("skipped_infeasible", 0L);
  state.skipped_empty_pseudo = ckpt.extra.value("skipped_empty_pseudo", 0L);
  for (const auto& row : ckpt.extra.at("history")) state.history.push_back(EpochStats::from_json(row));
  require(ckpt.best_params.has_value(), "train state checkpoint is missing the best snapshot");
  state.best_params = std::move(*ckpt.best_params);
  return state;
}

}  // namespace ctcst
