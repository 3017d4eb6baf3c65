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

#include <cmath>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctcst/common.hpp"
#include "ctcst/corpus.hpp"
#include "ctcst/matrix.hpp"
#include "ctcst/rng.hpp"

namespace ctcst {

// Spectrogram-level augmentation: speed perturbation (linear interpolation
// along time) and spectral masking. Augmentation only ever touches features;
// label sequences are copied through unchanged.
struct AugmentConfig {
  std::vector<double> speed_factors = {0.9, 1.0, 1.1};
  int freq_masks = 1;        // m_F
  int freq_mask_width = 8;   // n_F, clamped to D at draw time
  int time_masks = 2;        // m_T
  int time_mask_width = 16;  // n_T, clamped to T at draw time
  float mask_value = 0.0f;   // applied post-normalization, so roughly the mean

  void validate() const {
    require(!speed_factors.empty(), "augment: need at least one speed factor");
    for (double f : speed_factors) require(f > 0.0, "augment: speed factors must be > 0");
    require(freq_masks >= 0 && time_masks >= 0, "augment: mask counts must be >= 0");
    require(freq_mask_width >= 0 && time_mask_width >= 0, "augment: mask widths must be >= 0");
  }

  // Identity configuration: factor 1.0 only, no masks.
  static AugmentConfig disabled() {
    AugmentConfig cfg;
    cfg.speed_factors = {1.0};
    cfg.freq_masks = 0;
    cfg.time_masks = 0;
    return cfg;
  }

  int variants() const { return static_cast<int>(speed_factors.size()); }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;

  nlohmann::json to_json() const {
    return {{"speed_factors", speed_factors}, {"freq_masks", freq_masks},
            {"freq_mask_width", freq_mask_width}, {"time_masks", time_masks},
            {"time_mask_width", time_mask_width}, {"mask_value", mask_value}};
  }

  static AugmentConfig from_json(const nlohmann::json& j) {
    AugmentConfig c;
    c.speed_factors = j.value("speed_factors", c.speed_factors);
    c.freq_masks = j.value("freq_masks", c.freq_masks);
    c.freq_mask_width = j.value("freq_mask_width", c.freq_mask_width);
    c.time_masks = j.value("time_masks", c.time_masks);
    c.time_mask_width = j.value("time_mask_width", c.time_mask_width);
    c.mask_value = j.value("mask_value", c.mask_value);
    return c;
  }
};

// Output row t' samples source position t' * factor; bracketing frames are
// linearly interpolated and edge positions clamp to the first/last frame.
// Output length is round(T / factor), half away from zero. factor == 1.0 is
// bit-exact identity.
inline MatF speed_perturb(const MatF& features, double factor) {
  require(factor > 0.0, "speed_perturb: factor must be > 0");
  const int T = features.rows();
  const int D = features.cols();
  const int out_T = static_cast<int>(std::llround(static_cast<double>(T) / factor));
  require(out_T >= 1, "speed_perturb: output would be empty");

  MatF out(out_T, D);
  for (int t = 0; t < out_T; ++t) {
    double src = static_cast<double>(t) * factor;
    if (src > static_cast<double>(T - 1)) src = static_cast<double>(T - 1);
    const int lo = static_cast<int>(src);
    const double w = src - lo;
    if (w == 0.0) {
      for (int d = 0; d < D; ++d) out(t, d) = features(lo, d);
    } else {
      const int hi = std::min(lo + 1, T - 1);
      for (int d = 0; d < D; ++d) {
        out(t, d) = static_cast<float>((1.0 - w) * features(lo, d) + w * features(hi, d));
      }
    }
  }
  return out;
}

// m_F frequency segments (width ~ U{0..min(n_F, D)}) and m_T time segments
// (width ~ U{0..min(n_T, T)}) at uniform valid start positions are set to
// mask_value. A zero-width draw is a no-op and consumes no start draw.
inline MatF spectral_mask(const MatF& features, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int T = features.rows();
  const int D = features.cols();
  MatF out = features;
  Rng rng(seed);

  for (int m = 0; m < cfg.freq_masks; ++m) {
    const int width = static_cast<int>(rng.uniform_int(0, std::min(cfg.freq_mask_width, D)));
    if (width == 0) continue;
    const int start = static_cast<int>(rng.uniform_int(0, D - width));
    for (int t = 0; t < T; ++t)
      for (int d = start; d < start + width; ++d) out(t, d) = cfg.mask_value;
  }
  for (int m = 0; m < cfg.time_masks; ++m) {
    const int width = static_cast<int>(rng.uniform_int(0, std::min(cfg.time_mask_width, T)));
    if (width == 0) continue;
    const int start = static_cast<int>(rng.uniform_int(0, T - width));
    for (int t = start; t < start + width; ++t)
      for (int d = 0; d < D; ++d) out(t, d) = cfg.mask_value;
  }
  return out;
}

struct TrainingPair {
  MatF features;
  std::vector<int> labels;
};

// One distorted feature matrix per speed factor, each spectral-masked with a
// seed derived from (seed, variant index).
inline std::vector<MatF> augment_features(const MatF& features, const AugmentConfig& cfg,
                                          std::uint64_t seed) {
  cfg.validate();
  std::vector<MatF> out;
  out.reserve(cfg.speed_factors.size());
  for (std::size_t v = 0; v < cfg.speed_factors.size(); ++v) {
    MatF warped = speed_perturb(features, cfg.speed_factors[v]);
    out.push_back(spectral_mask(warped, cfg, derive_seed(seed, static_cast<std::uint64_t>(v))));
  }
  return out;
}

// Clamped linear time interpolation to an exact row count, matching the
// position map of speed_perturb with effective factor rows/new_rows.
// new_rows == rows is an identity copy.
template <typename S>
Mat<S> resample_rows(const Mat<S>& m, int new_rows) {
  require(new_rows >= 1, "resample_rows: need at least one output row");
  const int T = m.rows();
  if (new_rows == T) return m;
  const double factor = static_cast<double>(T) / static_cast<double>(new_rows);
  Mat<S> out(new_rows, m.cols());
  for (int t = 0; t < new_rows; ++t) {
    double src = static_cast<double>(t) * factor;
    if (src > static_cast<double>(T - 1)) src = static_cast<double>(T - 1);
    const int lo = static_cast<int>(src);
    const double w = src - lo;
    const int hi = std::min(lo + 1, T - 1);
    for (int d = 0; d < m.cols(); ++d) {
      out(t, d) = static_cast<S>((1.0 - w) * static_cast<double>(m(lo, d)) +
                                 w * static_cast<double>(m(hi, d)));
    }
  }
  return out;
}

namespace augment_detail {

inline std::vector<TrainingPair> make_variants(const MatF& features,
                                               const std::vector<int>& labels,
                                               const AugmentConfig& cfg, std::uint64_t seed) {
  std::vector<TrainingPair> out;
  for (auto& feat : augment_features(features, cfg, seed))
    out.push_back(TrainingPair{std::move(feat), labels});
  return out;
}

}  // namespace augment_detail

// One variant per speed factor, each spectral-masked; labels copied.
inline std::vector<TrainingPair> augment_supervised(const Utterance& utterance,
                                                    const AugmentConfig& cfg,
                                                    std::uint64_t seed) {
  require(utterance.labels.has_value(), "augment_supervised: utterance has no labels");
  return augment_detail::make_variants(utterance.features, *utterance.labels, cfg, seed);
}

// Same, but the labels are pseudo-labels decoded from the clean features;
// callers decode on the clean matrix and train on these distorted variants.
inline std::vector<TrainingPair> augment_unsupervised(const MatF& clean_features,
                                                      const std::vector<int>& pseudo_labels,
                                                      const AugmentConfig& cfg,
                                                      std::uint64_t seed) {
  require(!pseudo_labels.empty(), "augment_unsupervised: empty pseudo-label");
  return augment_detail::make_variants(clean_features, pseudo_labels, cfg, seed);
}

}  // namespace ctcst
