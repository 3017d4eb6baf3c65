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

// Minimal tour: generate a tiny corpus, train a small supervised model for a
// few epochs, and decode one dev utterance.

#include <iostream>

#include "ctcst/ctcst.hpp"

int main() {
  using namespace ctcst;

  CorpusSpec spec;
  spec.vocab_size = 3;
  spec.label_len_min = 2;
  spec.label_len_max = 4;
  spec.n_supervised = 16;
  spec.n_unsupervised = 8;
  spec.n_dev = 6;
  spec.n_test = 6;
  const Corpus corpus = normalize(generate_corpus(spec, 42));

  SupervisedTrainConfig cfg;
  cfg.model.input_dim = spec.feature_dim * spec.stack_k;
  cfg.model.num_outputs = corpus.vocab.size();
  cfg.model.layers = 1;
  cfg.model.hidden = 16;
  cfg.epochs = 8;
  const TrainState state = train_supervised(corpus, cfg);

  std::cout << "dev token error by epoch:";
  for (const auto& row : state.history) std::cout << ' ' << row.dev_token_error;
  std::cout << "\nbest epoch " << state.best_epoch << " at " << state.best_dev_error << '\n';

  const auto& utt = corpus.dev.front();
  const MatF logits = state.best_model().forward(stack_frames(utt.features, spec.stack_k),
                                                 RunMode::eval, 0);
  const Hypothesis hyp = beam_decode(log_posteriors(logits), corpus.blank(), 5);
  std::cout << "utterance " << utt.id << "\n  reference:";
  for (int l : *utt.labels) std::cout << ' ' << corpus.vocab.tokens[l];
  std::cout << "\n  decoded:  ";
  for (int l : hyp.labels) std::cout << ' ' << corpus.vocab.tokens[l];
  std::cout << '\n';
  return 0;
}
