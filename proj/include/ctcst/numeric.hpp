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
#include <cmath>
#include <limits>

#include "ctcst/matrix.hpp"

namespace ctcst {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(double a, double b, double c) { return log_sum_exp(log_sum_exp(a, b), c); }

// Row-wise log-softmax computed in double regardless of the input scalar.
template <typename S>
MatD log_softmax_rows(const Mat<S>& logits) {
  MatD out(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t) {
    double mx = kNegInf;
    for (int k = 0; k < logits.cols(); ++k) mx = std::max(mx, static_cast<double>(logits(t, k)));
    double sum = 0.0;
    for (int k = 0; k < logits.cols(); ++k) sum += std::exp(static_cast<double>(logits(t, k)) - mx);
    const double lz = mx + std::log(sum);
    for (int k = 0; k < logits.cols(); ++k) out(t, k) = static_cast<double>(logits(t, k)) - lz;
  }
  return out;
}

template <typename S>
MatD softmax_rows(const Mat<S>& logits) {
  MatD out = log_softmax_rows(logits);
  for (int t = 0; t < out.rows(); ++t)
    for (int k = 0; k < out.cols(); ++k) out(t, k) = std::exp(out(t, k));
  return out;
}

}  // namespace ctcst
