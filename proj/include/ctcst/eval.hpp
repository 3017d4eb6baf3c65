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

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcst/corpus.hpp"
#include "ctcst/decode.hpp"
#include "ctcst/model.hpp"
#include "ctcst/parallel.hpp"

namespace ctcst {

struct EditCounts {
  long subs = 0;
  long ins = 0;
  long dels = 0;
  long total() const { return subs + ins + dels; }
};

// Unit-cost Levenshtein alignment. Among minimal-cost alignments the one
// with the most diagonal moves is chosen (prefer substitution over a
// deletion+insertion pair), which makes the (S, I, D) split unique and
// symmetric under argument swap.
inline EditCounts edit_distance(std::span<const int> hyp, std::span<const int> ref) {
  const int n = static_cast<int>(hyp.size());
  const int m = static_cast<int>(ref.size());
  struct Cell {
    int cost;
    int diag;  // matched or substituted positions
  };
  auto better = [](Cell a, Cell b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.diag > b.diag;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (int j = 0; j <= m; ++j) prev[j] = {j, 0};
  for (int i = 1; i <= n; ++i) {
    cur[0] = {i, 0};
    for (int j = 1; j <= m; ++j) {
      const int sub_cost = hyp[i - 1] == ref[j - 1] ? 0 : 1;
      Cell best{prev[j - 1].cost + sub_cost, prev[j - 1].diag + 1};
      const Cell ins{prev[j].cost + 1, prev[j].diag};      // extra hyp token
      const Cell del{cur[j - 1].cost + 1, cur[j - 1].diag};  // missing ref token
      if (better(ins, best)) best = ins;
      if (better(del, best)) best = del;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cell final = prev[m];
  EditCounts counts;
  counts.subs = final.cost - n - m + 2 * final.diag;
  counts.ins = n - final.diag;
  counts.dels = m - final.diag;
  return counts;
}

struct ErrorReport {
  long subs = 0;
  long ins = 0;
  long dels = 0;
  long ref_tokens = 0;
  double token_error_rate = 0.0;
  int beam_width = 0;
  long utterances = 0;
  std::string checkpoint_id;

  void finish() {
    token_error_rate =
        ref_tokens > 0 ? static_cast<double>(subs + ins + dels) / static_cast<double>(ref_tokens)
                       : 0.0;
  }

  nlohmann::json to_json() const {
    return {{"substitutions", subs}, {"insertions", ins},    {"deletions", dels},
            {"ref_tokens", ref_tokens}, {"token_error_rate", token_error_rate},
            {"beam_width", beam_width}, {"utterances", utterances},
            {"checkpoint_id", checkpoint_id}};
  }
};

// Decode every utterance of a split in eval mode with a fixed beam width and
// micro-average the edit counts: rate = (sum errors) / (sum ref tokens).
// The unsupervised split may only be scored with oracle=true, which reads
// the hidden labels through the counted oracle accessor. Per-utterance
// decoding runs on the CTCST_THREADS worker pool; the reduction order is
// fixed, so reports are identical for any worker count.
inline ErrorReport evaluate(const AcousticModel<float>& model, const Corpus& corpus, SplitId split,
                            int beam_width = 20, bool oracle = false) {
  require(beam_width >= 1, "evaluate: beam width must be >= 1");
  const auto& utterances = corpus.split(split);
  ErrorReport report;
  report.beam_width = beam_width;

  // Reference lookup stays on the calling thread: it is where the oracle
  // refusal fires and where oracle reads are counted.
  std::vector<const std::vector<int>*> refs(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (split == SplitId::unsupervised) {
      require(oracle, "evaluate: unsupervised split requires the oracle flag");
      refs[i] = &corpus.oracle_labels(utterances[i].id);
    } else {
      require(utterances[i].labels.has_value(),
              "evaluate: utterance " + utterances[i].id + " has no labels");
      refs[i] = &*utterances[i].labels;
    }
  }

  struct PerUtterance {
    EditCounts counts;
    long ref_tokens = 0;
  };
  const auto results = parallel_map<PerUtterance>(
      static_cast<int>(utterances.size()), [&](int i) {
        const Utterance& utt = utterances[i];
        const MatF stacked = stack_frames(utt.features, corpus.spec.stack_k);
        const MatF logits = model.forward(stacked, RunMode::eval, 0);
        const Hypothesis hyp = beam_decode(log_posteriors(logits), corpus.blank(), beam_width);
        return PerUtterance{edit_distance(hyp.labels, *refs[i]),
                            static_cast<long>(refs[i]->size())};
      });
  for (const auto& r : results) {
    report.subs += r.counts.subs;
    report.ins += r.counts.ins;
    report.dels += r.counts.dels;
    report.ref_tokens += r.ref_tokens;
    ++report.utterances;
  }
  report.finish();
  return report;
}

// Micro-averaged token error of pseudo-labels against the hidden ground
// truth of the unsupervised split. Skipped (empty) records count as full
// deletions of their references. Diagnostic only — the training update path
// never sees these numbers.
template <typename Records>
ErrorReport pseudo_label_oracle_error(const Records& records, const Corpus& corpus) {
  ErrorReport report;
  for (const auto& rec : records) {
    const std::vector<int>& ref = corpus.oracle_labels(rec.utterance_id);
    if (rec.skipped || rec.labels.empty()) {
      report.dels += static_cast<long>(ref.size());
    } else {
      const EditCounts counts = edit_distance(rec.labels, ref);
      report.subs += counts.subs;
      report.ins += counts.ins;
      report.dels += counts.dels;
    }
    report.ref_tokens += static_cast<long>(ref.size());
    ++report.utterances;
  }
  report.finish();
  return report;
}

}  // namespace ctcst
