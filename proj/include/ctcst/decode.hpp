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

#include <algorithm>
#include <map>
#include <vector>

#include "ctcst/ctc.hpp"

namespace ctcst {

// Decoded label sequence with its log score. Greedy scores are best-path
// scores (sum of per-frame max log posteriors); beam scores for W >= 2 are
// collapsed-prefix masses. The two are comparable only within one decoder.
struct Hypothesis {
  std::vector<int> labels;
  double log_score = 0.0;
};

// Deterministic hypothesis ordering: higher mass, then shorter labels, then
// lexicographically smaller labels.
inline bool hypothesis_better(double score_a, const std::vector<int>& a, double score_b,
                              const std::vector<int>& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// Best-path decoding: per-frame argmax (ties -> lowest token index), then
// collapse. log_score is the path score.
inline Hypothesis greedy_decode(const Posteriorgram& post, int blank) {
  const auto& lp = post.log_probs;
  std::vector<int> path(lp.rows());
  double score = 0.0;
  for (int t = 0; t < lp.rows(); ++t) {
    int best = 0;
    for (int k = 1; k < lp.cols(); ++k)
      if (lp(t, k) > lp(t, best)) best = k;
    path[t] = best;
    score += lp(t, best);
  }
  return Hypothesis{collapse(path, blank), score};
}

// Prefix beam search over collapsed label prefixes, keeping per-prefix blank
// and non-blank ending masses and the top W prefixes per frame by total mass.
// W = 1 dispatches to the greedy best-path decoder.
inline Hypothesis beam_decode(const Posteriorgram& post, int blank, int width) {
  require(width >= 1, "beam_decode: width must be >= 1");
  if (width == 1) return greedy_decode(post, blank);

  const auto& lp = post.log_probs;
  const int T = lp.rows();
  const int K = lp.cols();

  struct Mass {
    double blank_end = kNegInf;
    double token_end = kNegInf;
    double total() const { return log_sum_exp(blank_end, token_end); }
  };
  using Beam = std::map<std::vector<int>, Mass>;

  Beam beam;
  beam[{}] = Mass{0.0, kNegInf};

  std::vector<int> extended;
  for (int t = 0; t < T; ++t) {
    Beam next;
    for (const auto& [prefix, mass] : beam) {
      const double total = mass.total();
      // Stay on the same prefix via blank.
      {
        Mass& m = next[prefix];
        m.blank_end = log_sum_exp(m.blank_end, total + lp(t, blank));
      }
      for (int k = 0; k < K; ++k) {
        if (k == blank) continue;
        const double emit = lp(t, k);
        if (!prefix.empty() && prefix.back() == k) {
          // Repeated token merges into the same prefix unless a blank
          // separated it, in which case it starts a new occurrence.
          {
            Mass& m = next[prefix];
            m.token_end = log_sum_exp(m.token_end, mass.token_end + emit);
          }
          extended = prefix;
          extended.push_back(k);
          Mass& m = next[extended];
          m.token_end = log_sum_exp(m.token_end, mass.blank_end + emit);
        } else {
          extended = prefix;
          extended.push_back(k);
          Mass& m = next[extended];
          m.token_end = log_sum_exp(m.token_end, total + emit);
        }
      }
    }
    if (static_cast<int>(next.size()) > width) {
      std::vector<std::pair<const std::vector<int>*, double>> order;
      order.reserve(next.size());
      for (const auto& [prefix, mass] : next) order.emplace_back(&prefix, mass.total());
      std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        return hypothesis_better(a.second, *a.first, b.second, *b.first);
      });
      Beam pruned;
      for (int i = 0; i < width; ++i) pruned.emplace(*order[i].first, next[*order[i].first]);
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  Hypothesis best;
  best.log_score = kNegInf;
  bool first = true;
  for (const auto& [prefix, mass] : beam) {
    const double total = mass.total();
    if (first || hypothesis_better(total, prefix, best.log_score, best.labels)) {
      best.labels = prefix;
      best.log_score = total;
      first = false;
    }
  }
  return best;
}

}  // namespace ctcst
