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
#include <vector>

#include "ctcst/common.hpp"
#include "ctcst/numeric.hpp"

namespace ctcst {

// Per-frame log posterior distributions over tokens plus blank.
// Each row log-sum-exps to 0; all entries are <= 0.
struct Posteriorgram {
  MatD log_probs;

  int frames() const { return log_probs.rows(); }
  int num_symbols() const { return log_probs.cols(); }

  bool is_valid(double tol = 1e-6) const {
    for (int t = 0; t < log_probs.rows(); ++t) {
      double lse = kNegInf;
      for (int k = 0; k < log_probs.cols(); ++k) {
        if (log_probs(t, k) > tol) return false;
        lse = log_sum_exp(lse, log_probs(t, k));
      }
      if (std::abs(lse) > tol) return false;
    }
    return true;
  }
};

template <typename S>
Posteriorgram log_posteriors(const Mat<S>& logits) {
  return Posteriorgram{log_softmax_rows(logits)};
}

// Merge adjacent repeats first, then drop blanks.
inline std::vector<int> collapse(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  bool have_prev = false;
  for (int tok : path) {
    if (!have_prev || tok != prev) {
      if (tok != blank) out.push_back(tok);
    }
    prev = tok;
    have_prev = true;
  }
  return out;
}

inline int count_repeats(std::span<const int> labels) {
  int repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  return repeats;
}

inline bool ctc_feasible(int frames, std::span<const int> labels) {
  return frames >= static_cast<int>(labels.size()) + count_repeats(labels);
}

// Loss in nats plus the exact gradient with respect to the logits (softmax
// fused). `feasible == false` signals the +inf / zero-gradient sentinel for
// utterances whose label sequence cannot be aligned in the given frames.
template <typename S>
struct CtcResult {
  double loss = 0.0;
  Mat<S> grad_logits;
  bool feasible = true;
};

// Forward-backward over the blank-augmented label lattice, entirely in
// log space with double accumulation. Gradient identity per frame t, k:
//   d(-log P(Y|X)) / d logit(t,k) = y(t,k) - sum_{s: ext[s]=k} gamma(t,s)
// where y = softmax(logits) and gamma is the posterior state occupancy.
template <typename S>
CtcResult<S> ctc_loss_grad(const Mat<S>& logits, std::span<const int> labels, int blank) {
  const int T = logits.rows();
  const int K = logits.cols();
  const int L = static_cast<int>(labels.size());
  require(T >= 1 && K >= 2, "ctc: logits must be T x K with T >= 1, K >= 2");
  require(blank >= 0 && blank < K, "ctc: blank index out of range");
  for (int l : labels)
    require(l >= 0 && l < K && l != blank, "ctc: labels must be non-blank token indices");

  if (!ctc_feasible(T, labels)) {
    return CtcResult<S>{kPosInf, Mat<S>(T, K, S(0)), false};
  }

  const MatD lp = log_softmax_rows(logits);

  // Extended label sequence: blank, y1, blank, y2, ..., yL, blank.
  const int E = 2 * L + 1;
  std::vector<int> ext(E, blank);
  for (int l = 0; l < L; ++l) ext[2 * l + 1] = labels[l];

  auto allow_skip = [&](int s) {
    // s-2 -> s skip is legal when s is a label state different from s-2's.
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  MatD alpha(T, E, kNegInf);  // includes the emission at frame t
  alpha(0, 0) = lp(0, ext[0]);
  if (E > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < E; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_sum_exp(acc, alpha(t - 1, s - 1));
      if (allow_skip(s)) acc = log_sum_exp(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + lp(t, ext[s]);
    }
  }

  double log_z = alpha(T - 1, E - 1);
  if (E > 1) log_z = log_sum_exp(log_z, alpha(T - 1, E - 2));
  // Feasibility guarantees at least one alignment, so log_z is finite.

  MatD beta(T, E, kNegInf);  // excludes the emission at frame t
  beta(T - 1, E - 1) = 0.0;
  if (E > 1) beta(T - 1, E - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < E; ++s) {
      double acc = beta(t + 1, s) + lp(t + 1, ext[s]);
      if (s + 1 < E) acc = log_sum_exp(acc, beta(t + 1, s + 1) + lp(t + 1, ext[s + 1]));
      if (s + 2 < E && allow_skip(s + 2))
        acc = log_sum_exp(acc, beta(t + 1, s + 2) + lp(t + 1, ext[s + 2]));
      beta(t, s) = acc;
    }
  }

  CtcResult<S> result;
  result.loss = std::max(0.0, -log_z);  // log_z <= 0 mathematically; guard fp dust
  result.grad_logits = Mat<S>(T, K, S(0));
  std::vector<double> occupancy(K);
  for (int t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (int s = 0; s < E; ++s) {
      const double g = alpha(t, s) + beta(t, s);
      if (g != kNegInf) occupancy[ext[s]] = log_sum_exp(occupancy[ext[s]], g);
    }
    for (int k = 0; k < K; ++k) {
      const double y = std::exp(lp(t, k));
      const double occ = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_z);
      result.grad_logits(t, k) = static_cast<S>(y - occ);
    }
  }
  return result;
}

}  // namespace ctcst
