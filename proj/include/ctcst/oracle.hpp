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

// Brute-force reference implementations used by the test suites. These
// deliberately share no code with the lattice recursion in ctc.hpp or the
// beam search in decode.hpp: paths are enumerated one by one in linear
// probability space and collapsed with a local routine.

#include <cmath>
#include <map>
#include <vector>

#include "ctcst/common.hpp"
#include "ctcst/decode.hpp"
#include "ctcst/matrix.hpp"

namespace ctcst {

namespace oracle_detail {

// Independent re-implementation of path collapse (merge repeats, drop blanks).
inline std::vector<int> collapse_path(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != blank) out.push_back(path[i]);
  }
  return out;
}

template <typename Visit>
void for_each_path(int frames, int symbols, Visit&& visit) {
  std::vector<int> path(frames, 0);
  while (true) {
    visit(path);
    int pos = frames - 1;
    while (pos >= 0 && path[pos] == symbols - 1) path[pos--] = 0;
    if (pos < 0) break;
    ++path[pos];
  }
}

inline void check_path_budget(int frames, int symbols, double budget, const char* what) {
  const double paths = std::pow(static_cast<double>(symbols), static_cast<double>(frames));
  require(paths <= budget, std::string(what) + ": path space too large for brute force");
}

}  // namespace oracle_detail

// Exact P(Y|X) by direct enumeration of all (V+1)^T paths, summing those
// whose collapse equals the labels. `probs` holds linear per-frame
// probabilities, one row per frame.
inline double brute_force_ctc(const MatD& probs, std::span<const int> labels, int blank) {
  const int T = probs.rows();
  const int K = probs.cols();
  oracle_detail::check_path_budget(T, K, 1e7, "brute_force_ctc");

  const std::vector<int> want(labels.begin(), labels.end());
  double total = 0.0;
  oracle_detail::for_each_path(T, K, [&](const std::vector<int>& path) {
    if (oracle_detail::collapse_path(path, blank) != want) return;
    double p = 1.0;
    for (int t = 0; t < T; ++t) p *= probs(t, path[t]);
    total += p;
  });
  return total;
}

// Globally optimal argmax_Y P(Y|X) over all label sequences, found by
// accumulating the collapsed mass of every path. Ties are broken exactly as
// in beam_decode: higher mass, shorter sequence, lexicographic.
inline Hypothesis exact_decode(const Posteriorgram& post, int blank) {
  const int T = post.frames();
  const int K = post.num_symbols();
  oracle_detail::check_path_budget(T, K, 1e7, "exact_decode");
  // Candidate sequences number at most sum_{l<=T} (K-1)^l; keep them bounded.
  double sequences = 1.0;
  double power = 1.0;
  for (int l = 1; l <= T; ++l) {
    power *= (K - 1);
    sequences += power;
  }
  require(sequences <= 1e6, "exact_decode: label sequence space too large");

  MatD probs(T, K);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) probs(t, k) = std::exp(post.log_probs(t, k));

  std::map<std::vector<int>, double> mass;
  oracle_detail::for_each_path(T, K, [&](const std::vector<int>& path) {
    double p = 1.0;
    for (int t = 0; t < T; ++t) p *= probs(t, path[t]);
    mass[oracle_detail::collapse_path(path, blank)] += p;
  });

  Hypothesis best;
  bool first = true;
  for (const auto& [labels, m] : mass) {
    const double score = std::log(m);
    if (first || hypothesis_better(score, labels, best.log_score, best.labels)) {
      best.labels = labels;
      best.log_score = score;
      first = false;
    }
  }
  return best;
}

}  // namespace ctcst
