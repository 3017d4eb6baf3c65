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

#include "ctcst/eval.hpp"
#include "ctcst/selftrain.hpp"
#include "test_util.hpp"

using namespace ctcst;

namespace {

std::vector<int> random_seq(Rng& rng, int max_len, int alphabet) {
  std::vector<int> seq(static_cast<std::size_t>(rng.uniform_int(0, max_len)));
  for (auto& s : seq) s = static_cast<int>(rng.uniform_int(0, alphabet - 1));
  return seq;
}

Corpus small_corpus(double noise, std::uint64_t seed) {
  CorpusSpec spec;
  spec.vocab_size = 3;
  spec.feature_dim = 6;
  spec.label_len_min = 1;
  spec.label_len_max = 3;
  spec.frames_per_token_min = 3;
  spec.frames_per_token_max = 4;
  spec.noise_stddev = noise;
  spec.n_supervised = 20;
  spec.n_unsupervised = 4;
  spec.n_dev = 8;
  spec.n_test = 6;
  return normalize(generate_corpus(spec, seed));
}

}  // namespace

TEST_CASE("edit distance hand-checked examples") {
  CHECK(edit_distance(std::vector<int>{1, 2}, std::vector<int>{1, 2}).total() == 0);
  const auto c = edit_distance(std::vector<int>{0, 1}, std::vector<int>{0, 1, 2});
  CHECK(c.subs == 0);
  CHECK(c.ins == 0);
  CHECK(c.dels == 1);
}

TEST_CASE("distance zero exactly for equal sequences") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 6, 4);
    const auto b = random_seq(rng, 6, 4);
    const auto c = edit_distance(a, b);
    CHECK((c.total() == 0) == (a == b));
  }
}

TEST_CASE("total cost is symmetric with insertions and deletions swapped") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_seq(rng, 7, 3);
    const auto b = random_seq(rng, 7, 3);
    const auto ab = edit_distance(a, b);
    const auto ba = edit_distance(b, a);
    CHECK(ab.total() == ba.total());
    CHECK(ab.subs == ba.subs);
    CHECK(ab.ins == ba.dels);
    CHECK(ab.dels == ba.ins);
  }
}

TEST_CASE("triangle inequality and length bound") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 5, 3);
    const auto b = random_seq(rng, 5, 3);
    const auto c = random_seq(rng, 5, 3);
    CHECK(edit_distance(a, c).total() <=
          edit_distance(a, b).total() + edit_distance(b, c).total());
    CHECK(edit_distance(a, b).total() <= static_cast<long>(std::max(a.size(), b.size())));
  }
}

TEST_CASE("substitution is preferred over deletion plus insertion") {
  const auto c = edit_distance(std::vector<int>{9}, std::vector<int>{7});
  CHECK(c.subs == 1);
  CHECK(c.ins == 0);
  CHECK(c.dels == 0);
}

TEST_CASE("micro average equals summed costs over summed reference lengths") {
  Rng rng(11);
  std::vector<std::vector<int>> hyps, refs;
  long cost = 0, ref_tokens = 0;
  for (int i = 0; i < 20; ++i) {
    hyps.push_back(random_seq(rng, 6, 3));
    auto ref = random_seq(rng, 5, 3);
    ref.push_back(0);  // nonempty references
    cost += edit_distance(hyps.back(), ref).total();
    ref_tokens += static_cast<long>(ref.size());
    refs.push_back(std::move(ref));
  }
  ErrorReport report;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto c = edit_distance(hyps[i], refs[i]);
    report.subs += c.subs;
    report.ins += c.ins;
    report.dels += c.dels;
    report.ref_tokens += static_cast<long>(refs[i].size());
  }
  report.finish();
  CHECK(report.token_error_rate ==
        doctest::Approx(static_cast<double>(cost) / ref_tokens).epsilon(1e-12));
}

TEST_CASE("a well-trained model on a noise-free corpus reaches rate zero") {
  // Un-normalized: per-utterance mean subtraction would wipe the prototype
  // out of single-token utterances and make them undecodable by design.
  CorpusSpec spec;
  spec.vocab_size = 3;
  spec.feature_dim = 6;
  spec.label_len_min = 1;
  spec.label_len_max = 3;
  spec.frames_per_token_min = 3;
  spec.frames_per_token_max = 4;
  spec.noise_stddev = 0.0;
  spec.n_supervised = 20;
  spec.n_unsupervised = 4;
  spec.n_dev = 8;
  spec.n_test = 6;
  const Corpus corpus = generate_corpus(spec, 21);
  SupervisedTrainConfig cfg;
  cfg.model.input_dim = corpus.spec.feature_dim * corpus.spec.stack_k;
  cfg.model.num_outputs = corpus.vocab.size();
  cfg.model.layers = 1;
  cfg.model.hidden = 16;
  cfg.epochs = 25;
  cfg.optim.lr = 5e-3;
  cfg.augment = AugmentConfig::disabled();  // keep the noise-free task clean
  const TrainState state = train_supervised(corpus, cfg);
  const ErrorReport report = evaluate(state.best_model(), corpus, SplitId::dev, 20);
  CHECK(report.token_error_rate == 0.0);
}

TEST_CASE("evaluation is deterministic and does not mutate the model") {
  const Corpus corpus = small_corpus(0.4, 23);
  AcousticModel<float> model(
      ModelConfig{corpus.spec.feature_dim * corpus.spec.stack_k, corpus.vocab.size(), 1, 8, 0.0},
      99);
  const auto params_before = model.params();
  const ErrorReport a = evaluate(model, corpus, SplitId::dev, 20);
  const ErrorReport b = evaluate(model, corpus, SplitId::dev, 20);
  CHECK(a.token_error_rate == b.token_error_rate);
  CHECK(a.subs == b.subs);
  CHECK(model.params() == params_before);
}

TEST_CASE("unsupervised split evaluation requires the oracle flag") {
  const Corpus corpus = small_corpus(0.4, 25);
  AcousticModel<float> model(
      ModelConfig{corpus.spec.feature_dim * corpus.spec.stack_k, corpus.vocab.size(), 1, 8, 0.0},
      1);
  CHECK_THROWS_WITH_AS(evaluate(model, corpus, SplitId::unsupervised, 5),
                       doctest::Contains("oracle"), Error);
  const long reads_before = corpus.oracle_read_count();
  const ErrorReport report = evaluate(model, corpus, SplitId::unsupervised, 5, true);
  CHECK(report.utterances == 4);
  CHECK(corpus.oracle_read_count() == reads_before + 4);
}

TEST_CASE("pseudo-label oracle error conventions") {
  const Corpus corpus = small_corpus(0.4, 27);
  SUBCASE("perfect pseudo-labels score zero") {
    std::vector<PseudoLabelRecord> records;
    for (const auto& utt : corpus.unsupervised) {
      PseudoLabelRecord rec;
      rec.utterance_id = utt.id;
      rec.labels = corpus.oracle_labels(utt.id);
      records.push_back(rec);
    }
    CHECK(pseudo_label_oracle_error(records, corpus).token_error_rate == 0.0);
  }
  SUBCASE("skipped records count as full deletions") {
    std::vector<PseudoLabelRecord> records(1);
    records[0].utterance_id = corpus.unsupervised[0].id;
    records[0].skipped = true;
    const auto report = pseudo_label_oracle_error(records, corpus);
    const auto& ref = corpus.oracle_labels(records[0].utterance_id);
    CHECK(report.dels == static_cast<long>(ref.size()));
    CHECK(report.token_error_rate == 1.0);
  }
  SUBCASE("unknown ids are rejected") {
    std::vector<PseudoLabelRecord> records(1);
    records[0].utterance_id = "nope-0000";
    CHECK_THROWS_AS(pseudo_label_oracle_error(records, corpus), Error);
  }
}
