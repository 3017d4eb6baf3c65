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

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcst/common.hpp"
#include "ctcst/matrix.hpp"
#include "ctcst/rng.hpp"

namespace ctcst {

enum class RunMode { train, eval };

struct ModelConfig {
  int input_dim = 24;    // post-stacking feature width
  int num_outputs = 7;   // tokens + blank
  int layers = 2;        // stacked bidirectional recurrent layers
  int hidden = 32;       // units per direction
  double dropout = 0.0;  // applied to each layer's output, inverted scaling

  void validate() const {
    require(input_dim >= 1, "model: input_dim must be >= 1");
    require(num_outputs >= 2, "model: need at least one token plus blank");
    require(layers >= 1 && hidden >= 1, "model: layers and hidden must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, "model: dropout rate must be in [0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  nlohmann::json to_json() const {
    return {{"input_dim", input_dim}, {"num_outputs", num_outputs}, {"layers", layers},
            {"hidden", hidden}, {"dropout", dropout}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.value("input_dim", c.input_dim);
    c.num_outputs = j.value("num_outputs", c.num_outputs);
    c.layers = j.value("layers", c.layers);
    c.hidden = j.value("hidden", c.hidden);
    c.dropout = j.value("dropout", c.dropout);
    return c;
  }
};

// Named parameter store shared by the model, its gradients, and the Adam
// moments. Tensor order is fixed, which fixes the checkpoint layout and the
// gradient-reduction order.
template <typename S>
struct ParamSet {
  struct DirParams {
    Mat<S> wx;  // 4H x in
    Mat<S> wh;  // 4H x H
    Mat<S> b;   // 4H x 1
  };
  std::vector<std::array<DirParams, 2>> layers;
  Mat<S> w_out;  // K x 2H
  Mat<S> b_out;  // K x 1

  static ParamSet shaped(const ModelConfig& cfg) {
    ParamSet p;
    p.layers.resize(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
      const int in = l == 0 ? cfg.input_dim : 2 * cfg.hidden;
      for (int d = 0; d < 2; ++d) {
        p.layers[l][d].wx = Mat<S>(4 * cfg.hidden, in);
        p.layers[l][d].wh = Mat<S>(4 * cfg.hidden, cfg.hidden);
        p.layers[l][d].b = Mat<S>(4 * cfg.hidden, 1);
      }
    }
    p.w_out = Mat<S>(cfg.num_outputs, 2 * cfg.hidden);
    p.b_out = Mat<S>(cfg.num_outputs, 1);
    return p;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    static const char* dir_name[2] = {"fwd", "bwd"};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (int d = 0; d < 2; ++d) {
        const std::string base = "lstm" + std::to_string(l) + "." + dir_name[d] + ".";
        fn(base + "wx", layers[l][d].wx);
        fn(base + "wh", layers[l][d].wh);
        fn(base + "b", layers[l][d].b);
      }
    }
    fn(std::string("head.w"), w_out);
    fn(std::string("head.b"), b_out);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ParamSet*>(this)->for_each(
        [&](const std::string& name, Mat<S>& m) { fn(name, static_cast<const Mat<S>&>(m)); });
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Mat<S>& m) { n += m.size(); });
    return n;
  }

  void fill(S v) {
    for_each([&](const std::string&, Mat<S>& m) { m.fill(v); });
  }

  // this += scale * other, elementwise, shapes must match.
  void axpy(double scale, const ParamSet& other) {
    auto it = collect_ptrs(other);
    std::size_t idx = 0;
    for_each([&](const std::string&, Mat<S>& m) {
      const Mat<S>* o = it[idx++];
      require(o->rows() == m.rows() && o->cols() == m.cols(), "paramset: shape mismatch");
      for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<S>(static_cast<double>(m.data()[i]) +
                                     scale * static_cast<double>(o->data()[i]));
    });
  }

  double squared_norm() const {
    double acc = 0.0;
    for_each([&](const std::string&, const Mat<S>& m) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = static_cast<double>(m.data()[i]);
        acc += v * v;
      }
    });
    return acc;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, const Mat<S>& m) { ok = ok && m.all_finite(); });
    return ok;
  }

  bool operator==(const ParamSet& other) const {
    auto a = collect_ptrs(*this);
    auto b = collect_ptrs(other);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(*a[i] == *b[i])) return false;
    return true;
  }

  static std::vector<const Mat<S>*> collect_ptrs(const ParamSet& p) {
    std::vector<const Mat<S>*> out;
    p.for_each([&](const std::string&, const Mat<S>& m) { out.push_back(&m); });
    return out;
  }

  static std::vector<Mat<S>*> collect_mut(ParamSet& p) {
    std::vector<Mat<S>*> out;
    p.for_each([&](const std::string&, Mat<S>& m) { out.push_back(&m); });
    return out;
  }
};

namespace model_detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace model_detail

// Bidirectional LSTM stack with a linear projection to per-frame logits.
// forward() records a tape in train mode callers can feed to backward() for
// exact gradients; parameters are only ever mutated through apply_delta /
// the optimizer, which invalidates older tapes.
template <typename S = float>
class AcousticModel {
 public:
  struct Tape {
    struct DirTrace {
      Mat<S> gates_i, gates_f, gates_g, gates_o;  // T x H activations
      Mat<S> cell, out;                           // T x H
    };
    std::vector<Mat<S>> layer_inputs;             // layer feeds + final head input
    std::vector<std::array<DirTrace, 2>> traces;  // per layer
    std::vector<Mat<S>> dropout_masks;            // per layer; empty when inactive
    std::uint64_t revision = 0;
    int frames = 0;
  };

  AcousticModel() = default;

  AcousticModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg.validate();
    params_ = ParamSet<S>::shaped(cfg);
    Rng rng(derive_seed(init_seed, 0x696e6974ULL));
    params_.for_each([&](const std::string& name, Mat<S>& m) {
      if (name.ends_with(".b") || name == "head.b") {
        m.fill(S(0));
        if (name.ends_with(".b") && name != "head.b") {
          // forget-gate bias starts at 1
          const int h = m.rows() / 4;
          for (int q = h; q < 2 * h; ++q) m(q, 0) = S(1);
        }
        return;
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
      for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<S>((2.0 * rng.uniform() - 1.0) * bound);
    });
  }

  const ModelConfig& config() const { return cfg_; }
  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }
  std::uint64_t revision() const { return revision_; }
  std::size_t parameter_count() const { return params_.count(); }

  // In-place parameter update; bumps the revision so stale tapes are caught.
  void bump_revision() { ++revision_; }

  Mat<S> forward(const Mat<S>& features, RunMode mode, std::uint64_t seed,
                 Tape* tape = nullptr) const {
    require(features.cols() == cfg_.input_dim,
            "model forward: feature width " + std::to_string(features.cols()) +
                " does not match input_dim " + std::to_string(cfg_.input_dim));
    require(features.rows() >= 1, "model forward: need at least one frame");
    const int T = features.rows();
    const int H = cfg_.hidden;
    const bool use_dropout = mode == RunMode::train && cfg_.dropout > 0.0;

    Tape local;
    Tape& tp = tape ? *tape : local;
    tp.layer_inputs.clear();
    tp.traces.assign(cfg_.layers, {});
    tp.dropout_masks.assign(cfg_.layers, Mat<S>());
    tp.revision = revision_;
    tp.frames = T;
    tp.layer_inputs.push_back(features);

    for (int l = 0; l < cfg_.layers; ++l) {
      const Mat<S>& x = tp.layer_inputs.back();
      Mat<S> concat(T, 2 * H);
      for (int d = 0; d < 2; ++d) {
        run_direction(x, params_.layers[l][d], d == 1, tp.traces[l][d]);
        for (int t = 0; t < T; ++t)
          for (int h = 0; h < H; ++h) concat(t, d * H + h) = tp.traces[l][d].out(t, h);
      }
      if (use_dropout) {
        Rng rng(derive_seed(seed, 0x64726f70ULL, static_cast<std::uint64_t>(l)));
        const double keep = 1.0 - cfg_.dropout;
        Mat<S> mask(T, 2 * H);
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < 2 * H; ++j)
            mask(t, j) = rng.uniform() < keep ? static_cast<S>(1.0 / keep) : S(0);
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < 2 * H; ++j) concat(t, j) = concat(t, j) * mask(t, j);
        tp.dropout_masks[l] = std::move(mask);
      }
      tp.layer_inputs.push_back(std::move(concat));
    }

    const Mat<S>& head_in = tp.layer_inputs.back();
    Mat<S> logits(T, cfg_.num_outputs);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < cfg_.num_outputs; ++k) {
        double acc = static_cast<double>(params_.b_out(k, 0));
        for (int j = 0; j < 2 * H; ++j)
          acc += static_cast<double>(params_.w_out(k, j)) * static_cast<double>(head_in(t, j));
        logits(t, k) = static_cast<S>(acc);
      }
    }
    return logits;
  }

  // Exact gradients for every parameter given d(loss)/d(logits).
  ParamSet<S> backward(const Tape& tape, const Mat<S>& grad_logits) const {
    require(tape.revision == revision_,
            "model backward: tape is stale (parameters changed since forward)");
    require(!tape.layer_inputs.empty(), "model backward: missing tape");
    require(grad_logits.rows() == tape.frames && grad_logits.cols() == cfg_.num_outputs,
            "model backward: grad_logits shape mismatch");
    const int T = tape.frames;
    const int H = cfg_.hidden;
    ParamSet<S> grads = ParamSet<S>::shaped(cfg_);

    // Head.
    const Mat<S>& head_in = tape.layer_inputs.back();
    Mat<S> d_layer(T, 2 * H, S(0));
    for (int k = 0; k < cfg_.num_outputs; ++k) {
      double gb = 0.0;
      for (int t = 0; t < T; ++t) gb += static_cast<double>(grad_logits(t, k));
      grads.b_out(k, 0) = static_cast<S>(gb);
      for (int j = 0; j < 2 * H; ++j) {
        double gw = 0.0;
        for (int t = 0; t < T; ++t)
          gw += static_cast<double>(grad_logits(t, k)) * static_cast<double>(head_in(t, j));
        grads.w_out(k, j) = static_cast<S>(gw);
      }
    }
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < 2 * H; ++j) {
        double acc = 0.0;
        for (int k = 0; k < cfg_.num_outputs; ++k)
          acc += static_cast<double>(grad_logits(t, k)) * static_cast<double>(params_.w_out(k, j));
        d_layer(t, j) = static_cast<S>(acc);
      }

    for (int l = cfg_.layers - 1; l >= 0; --l) {
      if (!tape.dropout_masks[l].empty()) {
        const Mat<S>& mask = tape.dropout_masks[l];
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < 2 * H; ++j) d_layer(t, j) = d_layer(t, j) * mask(t, j);
      }
      const Mat<S>& x = tape.layer_inputs[l];
      Mat<S> dx(T, x.cols(), S(0));
      for (int d = 0; d < 2; ++d) {
        backprop_direction(x, params_.layers[l][d], d == 1, tape.traces[l][d], d_layer, d * H,
                           grads.layers[l][d], dx);
      }
      d_layer = std::move(dx);
    }
    return grads;
  }

 private:
  using DirParams = typename ParamSet<S>::DirParams;
  using DirTrace = typename Tape::DirTrace;

  void run_direction(const Mat<S>& x, const DirParams& p, bool reverse, DirTrace& tr) const {
    const int T = x.rows();
    const int in = x.cols();
    const int H = cfg_.hidden;
    tr.gates_i = Mat<S>(T, H);
    tr.gates_f = Mat<S>(T, H);
    tr.gates_g = Mat<S>(T, H);
    tr.gates_o = Mat<S>(T, H);
    tr.cell = Mat<S>(T, H);
    tr.out = Mat<S>(T, H);

    std::vector<double> z(4 * H);
    for (int step = 0; step < T; ++step) {
      const int t = reverse ? T - 1 - step : step;
      const int prev = reverse ? t + 1 : t - 1;
      const bool has_prev = step > 0;
      const S* xrow = x.row(t);
      for (int q = 0; q < 4 * H; ++q) {
        double acc = static_cast<double>(p.b(q, 0));
        const S* wx = p.wx.row(q);
        for (int j = 0; j < in; ++j) acc += static_cast<double>(wx[j]) * static_cast<double>(xrow[j]);
        if (has_prev) {
          const S* wh = p.wh.row(q);
          const S* hprev = tr.out.row(prev);
          for (int j = 0; j < H; ++j)
            acc += static_cast<double>(wh[j]) * static_cast<double>(hprev[j]);
        }
        z[q] = acc;
      }
      for (int h = 0; h < H; ++h) {
        const double gi = model_detail::sigmoid(z[h]);
        const double gf = model_detail::sigmoid(z[H + h]);
        const double gg = std::tanh(z[2 * H + h]);
        const double go = model_detail::sigmoid(z[3 * H + h]);
        const double cprev = has_prev ? static_cast<double>(tr.cell(prev, h)) : 0.0;
        const double c = gf * cprev + gi * gg;
        tr.gates_i(t, h) = static_cast<S>(gi);
        tr.gates_f(t, h) = static_cast<S>(gf);
        tr.gates_g(t, h) = static_cast<S>(gg);
        tr.gates_o(t, h) = static_cast<S>(go);
        tr.cell(t, h) = static_cast<S>(c);
        tr.out(t, h) = static_cast<S>(go * std::tanh(c));
      }
    }
  }

  // Standard LSTM BPTT for one direction. d_concat carries the incoming
  // gradient on this direction's outputs at column offset `col0`.
  void backprop_direction(const Mat<S>& x, const DirParams& p, bool reverse, const DirTrace& tr,
                          const Mat<S>& d_concat, int col0, DirParams& g, Mat<S>& dx) const {
    const int T = x.rows();
    const int in = x.cols();
    const int H = cfg_.hidden;
    std::vector<double> dh_carry(H, 0.0), dc_carry(H, 0.0), dz(4 * H);

    for (int step = T - 1; step >= 0; --step) {
      const int t = reverse ? T - 1 - step : step;
      const int prev = reverse ? t + 1 : t - 1;
      const bool has_prev = step > 0;
      for (int h = 0; h < H; ++h) {
        const double gi = tr.gates_i(t, h);
        const double gf = tr.gates_f(t, h);
        const double gg = tr.gates_g(t, h);
        const double go = tr.gates_o(t, h);
        const double c = tr.cell(t, h);
        const double tc = std::tanh(c);
        const double dh = static_cast<double>(d_concat(t, col0 + h)) + dh_carry[h];
        const double dout = dh * tc;
        const double dc = dc_carry[h] + dh * go * (1.0 - tc * tc);
        const double cprev = has_prev ? static_cast<double>(tr.cell(prev, h)) : 0.0;
        const double di = dc * gg;
        const double df = dc * cprev;
        const double dg = dc * gi;
        dz[h] = di * gi * (1.0 - gi);
        dz[H + h] = df * gf * (1.0 - gf);
        dz[2 * H + h] = dg * (1.0 - gg * gg);
        dz[3 * H + h] = dout * go * (1.0 - go);
        dc_carry[h] = dc * gf;
      }
      const S* xrow = x.row(t);
      for (int q = 0; q < 4 * H; ++q) {
        const double dzq = dz[q];
        g.b(q, 0) = static_cast<S>(static_cast<double>(g.b(q, 0)) + dzq);
        S* gwx = g.wx.row(q);
        for (int j = 0; j < in; ++j)
          gwx[j] = static_cast<S>(static_cast<double>(gwx[j]) + dzq * static_cast<double>(xrow[j]));
        if (has_prev) {
          S* gwh = g.wh.row(q);
          const S* hprev = tr.out.row(prev);
          for (int j = 0; j < H; ++j)
            gwh[j] = static_cast<S>(static_cast<double>(gwh[j]) +
                                    dzq * static_cast<double>(hprev[j]));
        }
      }
      S* dxrow = dx.row(t);
      for (int j = 0; j < in; ++j) {
        double acc = static_cast<double>(dxrow[j]);
        for (int q = 0; q < 4 * H; ++q)
          acc += static_cast<double>(p.wx(q, j)) * dz[q];
        dxrow[j] = static_cast<S>(acc);
      }
      std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
      if (has_prev) {
        for (int j = 0; j < H; ++j) {
          double acc = 0.0;
          for (int q = 0; q < 4 * H; ++q)
            acc += static_cast<double>(p.wh(q, j)) * dz[q];
          dh_carry[j] = acc;
        }
      }
    }
  }

  ModelConfig cfg_;
  ParamSet<S> params_;
  std::uint64_t revision_ = 0;
};

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip; <= 0 disables

  void validate() const {
    require(lr > 0.0, "adam: lr must be > 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam: betas in [0,1)");
    require(eps > 0.0, "adam: eps must be > 0");
  }

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;

  nlohmann::json to_json() const {
    return {{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps},
            {"clip_norm", clip_norm}};
  }
  static AdamConfig from_json(const nlohmann::json& j) {
    AdamConfig c;
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    return c;
  }
};

template <typename S>
struct AdamState {
  AdamConfig cfg;
  long step = 0;
  ParamSet<S> m;
  ParamSet<S> v;

  AdamState() = default;
  AdamState(const AdamConfig& config, const ModelConfig& model_cfg) : cfg(config) {
    cfg.validate();
    m = ParamSet<S>::shaped(model_cfg);
    v = ParamSet<S>::shaped(model_cfg);
  }
};

// Bias-corrected adaptive-moment update, in place, with global-norm clipping.
// Non-finite gradients abort the step before any state is touched.
template <typename S>
void adam_step(AcousticModel<S>& model, AdamState<S>& opt, const ParamSet<S>& grads) {
  require(grads.all_finite(), "adam: non-finite gradient, aborting step");
  double scale = 1.0;
  if (opt.cfg.clip_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > opt.cfg.clip_norm) scale = opt.cfg.clip_norm / norm;
  }
  const long t = ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opt.cfg.beta2, static_cast<double>(t));

  auto grad_ptrs = ParamSet<S>::collect_ptrs(grads);
  auto m_ptrs = ParamSet<S>::collect_mut(opt.m);
  auto v_ptrs = ParamSet<S>::collect_mut(opt.v);
  std::size_t idx = 0;
  model.params().for_each([&](const std::string&, Mat<S>& w) {
    const Mat<S>& g = *grad_ptrs[idx];
    Mat<S>& m = *m_ptrs[idx];
    Mat<S>& v = *v_ptrs[idx];
    ++idx;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = scale * static_cast<double>(g.data()[i]);
      const double mi = opt.cfg.beta1 * static_cast<double>(m.data()[i]) +
                        (1.0 - opt.cfg.beta1) * gi;
      const double vi = opt.cfg.beta2 * static_cast<double>(v.data()[i]) +
                        (1.0 - opt.cfg.beta2) * gi * gi;
      m.data()[i] = static_cast<S>(mi);
      v.data()[i] = static_cast<S>(vi);
      const double update = opt.cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + opt.cfg.eps);
      w.data()[i] = static_cast<S>(static_cast<double>(w.data()[i]) - update);
    }
  });
  model.bump_revision();
}

}  // namespace ctcst
