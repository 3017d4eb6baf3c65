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

#include <cmath>

#include "ctcst/ctc.hpp"
#include "ctcst/oracle.hpp"
#include "test_util.hpp"

using namespace ctcst;

namespace {
constexpr int kBlank = 2;  // V = 2 tokens {0, 1}, blank last

MatD uniform_logits(int frames, int symbols) { return MatD(frames, symbols, 0.0); }
}  // namespace

TEST_CASE("collapse merges repeats then removes blanks") {
  const int blank = 9;
  CHECK(collapse(std::vector<int>{0, 0, blank, 1}, blank) == std::vector<int>{0, 1});
  CHECK(collapse(std::vector<int>{0, blank, 0}, blank) == std::vector<int>{0, 0});
  CHECK(collapse(std::vector<int>{blank, blank}, blank) == std::vector<int>{});
  CHECK(collapse(std::vector<int>{}, blank) == std::vector<int>{});
}

TEST_CASE("collapse stabilizes after two applications") {
  // collapse itself is not idempotent on arbitrary paths: (a, blank, a)
  // collapses to (a, a), which collapses further to (a). Once the result is
  // blank-free and repeat-free it is a fixed point, so c(c(p)) is stable and
  // blank-free inputs without adjacent repeats pass through unchanged.
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = static_cast<int>(rng.uniform_int(0, 8));
    std::vector<int> path(T);
    for (auto& p : path) p = static_cast<int>(rng.uniform_int(0, 3));
    const auto once = collapse(path, 3);
    const auto twice = collapse(once, 3);
    CHECK(collapse(twice, 3) == twice);
    for (int tok : once) CHECK(tok != 3);
    if (count_repeats(once) == 0) CHECK(twice == once);
  }
}

TEST_CASE("single-frame single-label loss is -log p") {
  // P(token 0) = 0.7 via logits log(0.7), log(0.2), log(0.1)
  MatD logits = MatD::from_rows({{std::log(0.7), std::log(0.2), std::log(0.1)}});
  const std::vector<int> labels{0};
  const auto res = ctc_loss_grad(logits, labels, kBlank);
  CHECK(res.feasible);
  CHECK(res.loss == doctest::Approx(-std::log(0.7)).epsilon(1e-12));
  CHECK(res.loss == doctest::Approx(0.356674943).epsilon(1e-6));
}

TEST_CASE("two frames, one label, uniform posteriors: hand-enumerable") {
  // Paths collapsing to (a): aa, a., .a over 3 symbols -> P = 3/9, loss = ln 3
  MatD logits = uniform_logits(2, 3);
  const std::vector<int> labels{0};
  const auto res = ctc_loss_grad(logits, labels, kBlank);
  CHECK(res.loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("empty label sequence scores the all-blank path") {
  MatD logits = uniform_logits(3, 3);
  const auto res = ctc_loss_grad(logits, std::vector<int>{}, kBlank);
  CHECK(res.feasible);
  CHECK(res.loss == doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("infeasible utterance yields the +inf sentinel with zero gradient") {
  MatD logits = uniform_logits(2, 3);
  SUBCASE("too many labels") {
    const auto res = ctc_loss_grad(logits, std::vector<int>{0, 1, 0}, kBlank);
    CHECK_FALSE(res.feasible);
    CHECK(std::isinf(res.loss));
    CHECK(res.loss > 0);
    for (int t = 0; t < 2; ++t)
      for (int k = 0; k < 3; ++k) CHECK(res.grad_logits(t, k) == 0.0);
  }
  SUBCASE("repeat needs a separating blank frame") {
    const auto res = ctc_loss_grad(logits, std::vector<int>{0, 0}, kBlank);
    CHECK_FALSE(res.feasible);
  }
}

TEST_CASE("blank or out-of-range labels are rejected") {
  MatD logits = uniform_logits(3, 3);
  CHECK_THROWS_AS(ctc_loss_grad(logits, std::vector<int>{kBlank}, kBlank), Error);
  CHECK_THROWS_AS(ctc_loss_grad(logits, std::vector<int>{5}, kBlank), Error);
}

TEST_CASE("loss matches brute-force enumeration on random instances") {
  Rng rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int symbols = static_cast<int>(rng.uniform_int(2, 4));  // V+1, V <= 3
    const int frames = static_cast<int>(rng.uniform_int(1, 6));
    const int len = static_cast<int>(rng.uniform_int(0, 3));
    const auto labels = test::random_labels(len, symbols, rng);
    const MatD logits = test::random_logits(frames, symbols, rng);
    const auto res = ctc_loss_grad(logits, labels, symbols - 1);
    const double brute = brute_force_ctc(softmax_rows(logits), labels, symbols - 1);
    if (!res.feasible) {
      CHECK(brute == 0.0);
      continue;
    }
    worst = std::max(worst, std::abs(std::exp(-res.loss) - brute));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("brute force refuses oversized path spaces") {
  MatD probs(40, 4, 0.25);
  CHECK_THROWS_AS(brute_force_ctc(probs, std::vector<int>{0}, 3), Error);
}

TEST_CASE("brute force: label longer than any collapse is zero mass") {
  MatD probs(2, 3, 1.0 / 3.0);
  CHECK(brute_force_ctc(probs, std::vector<int>{0, 1, 0}, 2) == 0.0);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(99);
  double worst = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    const int symbols = static_cast<int>(rng.uniform_int(2, 4));
    const int frames = static_cast<int>(rng.uniform_int(1, 5));
    int len = static_cast<int>(rng.uniform_int(0, 2));
    auto labels = test::random_labels(len, symbols, rng);
    MatD logits = test::random_logits(frames, symbols, rng);
    if (!ctc_feasible(frames, labels)) labels.clear();
    const auto res = ctc_loss_grad(logits, labels, symbols - 1);
    REQUIRE(res.feasible);
    for (int t = 0; t < frames; ++t) {
      for (int k = 0; k < symbols; ++k) {
        const double saved = logits(t, k);
        logits(t, k) = saved + h;
        const double up = ctc_loss_grad(logits, labels, symbols - 1).loss;
        logits(t, k) = saved - h;
        const double down = ctc_loss_grad(logits, labels, symbols - 1).loss;
        logits(t, k) = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, test::rel_err(res.grad_logits(t, k), fd));
      }
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("gradient rows sum to zero (softmax identity)") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int symbols = 4;
    const int frames = static_cast<int>(rng.uniform_int(2, 6));
    const auto labels = test::random_labels(2, symbols, rng);
    if (!ctc_feasible(frames, labels)) continue;
    const auto res = ctc_loss_grad(test::random_logits(frames, symbols, rng), labels, 3);
    for (int t = 0; t < frames; ++t) {
      double sum = 0.0;
      for (int k = 0; k < symbols; ++k) sum += res.grad_logits(t, k);
      CHECK(std::abs(sum) <= 1e-6);
    }
  }
}

TEST_CASE("raising a label logit along a feasible alignment never hurts") {
  // Hand-built: 3 frames, labels (0); bump the logit of token 0 at frame 1.
  MatD logits = MatD::from_rows({{0.3, -0.1, 0.4}, {0.0, 0.2, -0.3}, {-0.2, 0.1, 0.5}});
  const std::vector<int> labels{0};
  const double before = ctc_loss_grad(logits, labels, kBlank).loss;
  for (double bump : {0.1, 0.5, 1.0, 2.0}) {
    MatD bumped = logits;
    bumped(1, 0) += bump;
    CHECK(ctc_loss_grad(bumped, labels, kBlank).loss <= before + 1e-12);
  }
}

TEST_CASE("loss is nonnegative and grads finite on peaked inputs") {
  MatD logits(4, 3, 0.0);
  for (int t = 0; t < 4; ++t) logits(t, t % 2) = 30.0;  // extremely peaked
  const auto res = ctc_loss_grad(logits, std::vector<int>{0, 1}, kBlank);
  CHECK(res.loss >= 0.0);
  CHECK(res.grad_logits.all_finite());
}

TEST_CASE("posteriorgram validity helper") {
  Posteriorgram good = log_posteriors(MatD(3, 4, 0.7));
  CHECK(good.is_valid());
  Posteriorgram bad{MatD(2, 3, -0.1)};  // rows do not sum to one
  CHECK_FALSE(bad.is_valid());
}
