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

#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctcst/common.hpp"
#include "ctcst/ctc.hpp"
#include "ctcst/matrix.hpp"
#include "ctcst/rng.hpp"
#include "ctcst/serialize.hpp"

namespace ctcst {

inline constexpr const char* kCorpusFormatVersion = "ctcst-corpus-v1";

// Token inventory including the reserved blank symbol (kept at the last
// index). Label sequences are indices into `tokens` and never the blank.
struct Vocabulary {
  std::vector<std::string> tokens;
  int blank_index = 0;

  int size() const { return static_cast<int>(tokens.size()); }
  int non_blank_count() const { return size() - 1; }

  static Vocabulary synthetic(int non_blank_tokens) {
    require(non_blank_tokens >= 1, "vocabulary needs at least one non-blank token");
    Vocabulary v;
    for (int i = 0; i < non_blank_tokens; ++i) {
      std::ostringstream name;
      name << "t" << i;
      v.tokens.push_back(name.str());
    }
    v.tokens.push_back("<blank>");
    v.blank_index = non_blank_tokens;
    return v;
  }

  void validate() const {
    require(size() >= 2, "vocabulary must have at least one token plus blank");
    require(blank_index >= 0 && blank_index < size(), "blank index out of range");
    for (std::size_t i = 0; i < tokens.size(); ++i)
      for (std::size_t j = i + 1; j < tokens.size(); ++j)
        require(tokens[i] != tokens[j], "duplicate token identifier: " + tokens[i]);
  }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

struct Utterance {
  std::string id;
  MatF features;                            // T frames x D bins
  std::optional<std::vector<int>> labels;   // absent on the trainer's unsupervised view

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class SplitId { supervised = 0, unsupervised = 1, dev = 2, test = 3 };

inline const char* split_name(SplitId s) {
  switch (s) {
    case SplitId::supervised: return "supervised";
    case SplitId::unsupervised: return "unsupervised";
    case SplitId::dev: return "dev";
    case SplitId::test: return "test";
  }
  return "?";
}

// Defaults are the calibrated experiment corpus: durations in [3, 5] keep
// token-count readable from run lengths (2*min > max, so a run of one
// prototype cannot be confused between one and two tokens), and 24
// supervised vs 192 unsupervised utterances leaves the base system strongly
// coverage-limited, which is the regime self-training exploits.
struct CorpusSpec {
  int vocab_size = 6;        // non-blank tokens
  int feature_dim = 8;       // D, pre-stacking
  std::uint64_t prototype_seed = 7;
  int label_len_min = 3;
  int label_len_max = 8;
  int frames_per_token_min = 3;
  int frames_per_token_max = 5;
  double noise_stddev = 0.5;
  int n_supervised = 24;
  int n_unsupervised = 192;
  int n_dev = 64;
  int n_test = 64;
  int stack_k = 3;           // stacking factor the feasibility guarantee targets

  void validate() const {
    require(vocab_size >= 1, "corpus spec: vocab_size must be >= 1");
    require(feature_dim >= 1, "corpus spec: feature_dim must be >= 1");
    require(label_len_min >= 1 && label_len_max >= label_len_min,
            "corpus spec: label length range empty");
    require(frames_per_token_min >= 1, "corpus spec: frames-per-token must allow alignment (>= 1)");
    require(frames_per_token_max >= frames_per_token_min, "corpus spec: duration range empty");
    require(noise_stddev >= 0.0, "corpus spec: noise stddev must be >= 0");
    require(n_supervised >= 1 && n_unsupervised >= 1 && n_dev >= 1 && n_test >= 1,
            "corpus spec: all split sizes must be >= 1");
    require(stack_k >= 1, "corpus spec: stack_k must be >= 1");
  }

  friend bool operator==(const CorpusSpec&, const CorpusSpec&) = default;

  nlohmann::json to_json() const {
    return {{"vocab_size", vocab_size},
            {"feature_dim", feature_dim},
            {"prototype_seed", prototype_seed},
            {"label_len_min", label_len_min},
            {"label_len_max", label_len_max},
            {"frames_per_token_min", frames_per_token_min},
            {"frames_per_token_max", frames_per_token_max},
            {"noise_stddev", noise_stddev},
            {"n_supervised", n_supervised},
            {"n_unsupervised", n_unsupervised},
            {"n_dev", n_dev},
            {"n_test", n_test},
            {"stack_k", stack_k}};
  }

  static CorpusSpec from_json(const nlohmann::json& j) {
    CorpusSpec s;
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.prototype_seed = j.value("prototype_seed", s.prototype_seed);
    s.label_len_min = j.value("label_len_min", s.label_len_min);
    s.label_len_max = j.value("label_len_max", s.label_len_max);
    s.frames_per_token_min = j.value("frames_per_token_min", s.frames_per_token_min);
    s.frames_per_token_max = j.value("frames_per_token_max", s.frames_per_token_max);
    s.noise_stddev = j.value("noise_stddev", s.noise_stddev);
    s.n_supervised = j.value("n_supervised", s.n_supervised);
    s.n_unsupervised = j.value("n_unsupervised", s.n_unsupervised);
    s.n_dev = j.value("n_dev", s.n_dev);
    s.n_test = j.value("n_test", s.n_test);
    s.stack_k = j.value("stack_k", s.stack_k);
    return s;
  }
};

// Immutable after construction. The unsupervised split's ground-truth labels
// are kept out of the trainer-visible Utterance objects entirely: they live
// in a hidden map whose only accessor is oracle_labels(), and every access
// bumps a counter so tests can prove the training path never reads them.
class Corpus {
 public:
  CorpusSpec spec;
  Vocabulary vocab;
  std::vector<Utterance> supervised;
  std::vector<Utterance> unsupervised;  // labels == nullopt, features only
  std::vector<Utterance> dev;
  std::vector<Utterance> test;

  Corpus() = default;
  Corpus(const Corpus& other)
      : spec(other.spec),
        vocab(other.vocab),
        supervised(other.supervised),
        unsupervised(other.unsupervised),
        dev(other.dev),
        test(other.test),
        hidden_labels_(other.hidden_labels_),
        oracle_reads_(other.oracle_reads_.load()) {}
  Corpus& operator=(const Corpus& other) {
    if (this != &other) {
      spec = other.spec;
      vocab = other.vocab;
      supervised = other.supervised;
      unsupervised = other.unsupervised;
      dev = other.dev;
      test = other.test;
      hidden_labels_ = other.hidden_labels_;
      oracle_reads_.store(other.oracle_reads_.load());
    }
    return *this;
  }
  Corpus(Corpus&&) = default;
  Corpus& operator=(Corpus&&) = default;

  int blank() const { return vocab.blank_index; }

  const std::vector<Utterance>& split(SplitId s) const {
    switch (s) {
      case SplitId::supervised: return supervised;
      case SplitId::unsupervised: return unsupervised;
      case SplitId::dev: return dev;
      case SplitId::test: return test;
    }
    fail("unknown split");
  }

  void set_hidden_labels(std::map<std::string, std::vector<int>> labels) {
    hidden_labels_ = std::move(labels);
  }

  bool has_hidden_labels() const { return !hidden_labels_.empty(); }

  // Privileged diagnostic access for the eval module. Counted.
  const std::vector<int>& oracle_labels(const std::string& id) const {
    auto it = hidden_labels_.find(id);
    require(it != hidden_labels_.end(), "oracle_labels: unknown unsupervised utterance id " + id);
    oracle_reads_.fetch_add(1, std::memory_order_relaxed);
    return it->second;
  }

  long oracle_read_count() const { return oracle_reads_.load(std::memory_order_relaxed); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.spec == b.spec && a.vocab == b.vocab && a.supervised == b.supervised &&
           a.unsupervised == b.unsupervised && a.dev == b.dev && a.test == b.test &&
           a.hidden_labels_ == b.hidden_labels_;
  }

  friend void save_corpus(const Corpus& corpus, const std::string& path);
  friend Corpus load_corpus(const std::string& path);

 private:
  std::map<std::string, std::vector<int>> hidden_labels_;
  mutable std::atomic<long> oracle_reads_{0};
};

// Fixed random prototype vector per non-blank token, Gaussian entries,
// determined entirely by the spec's prototype_seed.
inline std::vector<std::vector<float>> token_prototypes(const CorpusSpec& spec) {
  Rng rng(derive_seed(spec.prototype_seed, 0x70726f746fULL));
  std::vector<std::vector<float>> protos(spec.vocab_size);
  for (auto& p : protos) {
    p.resize(spec.feature_dim);
    for (auto& x : p) x = static_cast<float>(rng.gaussian());
  }
  return protos;
}

namespace corpus_detail {

struct Rendered {
  std::vector<int> labels;
  MatF features;
};

inline Rendered render_utterance(const CorpusSpec& spec,
                                 const std::vector<std::vector<float>>& protos, Rng& rng) {
  // Rejection-resample (labels, durations) until the utterance stays
  // CTC-feasible after frame stacking: ceil(T/k) >= L + repeats.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int len = static_cast<int>(rng.uniform_int(spec.label_len_min, spec.label_len_max));
    std::vector<int> labels(len);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, spec.vocab_size - 1));
    std::vector<int> durations(len);
    int total_frames = 0;
    for (auto& d : durations) {
      d = static_cast<int>(rng.uniform_int(spec.frames_per_token_min, spec.frames_per_token_max));
      total_frames += d;
    }
    const int stacked = (total_frames + spec.stack_k - 1) / spec.stack_k;
    if (stacked < len + count_repeats(labels)) continue;

    Rendered r;
    r.labels = std::move(labels);
    r.features = MatF(total_frames, spec.feature_dim);
    int t = 0;
    for (int l = 0; l < len; ++l) {
      const auto& proto = protos[r.labels[l]];
      for (int d = 0; d < durations[l]; ++d, ++t) {
        for (int f = 0; f < spec.feature_dim; ++f) {
          r.features(t, f) =
              proto[f] + static_cast<float>(spec.noise_stddev * rng.gaussian());
        }
      }
    }
    return r;
  }
  fail("generate_corpus: spec cannot satisfy CTC feasibility after stacking "
       "(label lengths too long for the duration range)");
}

inline std::string make_id(SplitId split, int index) {
  static const char* prefix[] = {"sup", "uns", "dev", "tst"};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s-%04d", prefix[static_cast<int>(split)], index);
  return buf;
}

}  // namespace corpus_detail

// Pure function of (spec, seed): equal inputs produce equal corpora.
inline Corpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto protos = token_prototypes(spec);

  Corpus corpus;
  corpus.spec = spec;
  corpus.vocab = Vocabulary::synthetic(spec.vocab_size);

  std::map<std::string, std::vector<int>> hidden;
  const SplitId splits[] = {SplitId::supervised, SplitId::unsupervised, SplitId::dev,
                            SplitId::test};
  const int counts[] = {spec.n_supervised, spec.n_unsupervised, spec.n_dev, spec.n_test};
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < counts[s]; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i)));
      auto rendered = corpus_detail::render_utterance(spec, protos, rng);
      Utterance utt;
      utt.id = corpus_detail::make_id(splits[s], i);
      utt.features = std::move(rendered.features);
      if (splits[s] == SplitId::unsupervised) {
        hidden[utt.id] = std::move(rendered.labels);
        corpus.unsupervised.push_back(std::move(utt));
      } else {
        utt.labels = std::move(rendered.labels);
        switch (splits[s]) {
          case SplitId::supervised: corpus.supervised.push_back(std::move(utt)); break;
          case SplitId::dev: corpus.dev.push_back(std::move(utt)); break;
          case SplitId::test: corpus.test.push_back(std::move(utt)); break;
          default: break;
        }
      }
    }
  }
  corpus.set_hidden_labels(std::move(hidden));
  return corpus;
}

// Per-utterance, per-dimension mean subtraction (no speaker structure in the
// synthetic corpus). Idempotent up to float rounding.
inline MatF normalize_features(const MatF& features) {
  MatF out(features.rows(), features.cols());
  for (int d = 0; d < features.cols(); ++d) {
    double mean = 0.0;
    for (int t = 0; t < features.rows(); ++t) mean += features(t, d);
    mean /= std::max(1, features.rows());
    for (int t = 0; t < features.rows(); ++t)
      out(t, d) = static_cast<float>(features(t, d) - mean);
  }
  return out;
}

inline Corpus normalize(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto* split : {&out.supervised, &out.unsupervised, &out.dev, &out.test})
    for (auto& utt : *split) utt.features = normalize_features(utt.features);
  return out;
}

// Concatenate every k consecutive frames; the last output row is zero-padded
// to width k*D. Applied after augmentation.
inline MatF stack_frames(const MatF& features, int k) {
  require(k >= 1, "stack_frames: k must be >= 1");
  const int T = features.rows();
  const int D = features.cols();
  const int rows = (T + k - 1) / k;
  MatF out(rows, k * D, 0.0f);
  for (int t = 0; t < T; ++t) {
    const int r = t / k;
    const int off = (t % k) * D;
    for (int d = 0; d < D; ++d) out(r, off + d) = features(t, d);
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  corpus.spec.validate();
  corpus.vocab.validate();
  auto os = io::open_output(path);

  nlohmann::json header = {
      {"version", kCorpusFormatVersion},
      {"spec", corpus.spec.to_json()},
      {"vocab", {{"tokens", corpus.vocab.tokens}, {"blank_index", corpus.vocab.blank_index}}},
      {"splits",
       {{"supervised", corpus.supervised.size()},
        {"unsupervised", corpus.unsupervised.size()},
        {"dev", corpus.dev.size()},
        {"test", corpus.test.size()}}}};
  io::write_header(os, header);

  auto write_record = [&](const Utterance& utt, SplitId split,
                          const std::vector<int>* labels) {
    io::write_string(os, utt.id);
    io::write_u8(os, static_cast<std::uint8_t>(split));
    io::write_u32(os, static_cast<std::uint32_t>(utt.features.rows()));
    io::write_u32(os, static_cast<std::uint32_t>(utt.features.cols()));
    for (float v : utt.features.storage()) io::write_f32(os, v);
    io::write_u8(os, labels ? 1 : 0);
    if (labels) {
      io::write_u32(os, static_cast<std::uint32_t>(labels->size()));
      for (int l : *labels) io::write_u32(os, static_cast<std::uint32_t>(l));
    }
  };

  for (const auto& utt : corpus.supervised)
    write_record(utt, SplitId::supervised, utt.labels ? &*utt.labels : nullptr);
  for (const auto& utt : corpus.unsupervised) {
    auto it = corpus.hidden_labels_.find(utt.id);
    write_record(utt, SplitId::unsupervised,
                 it != corpus.hidden_labels_.end() ? &it->second : nullptr);
  }
  for (const auto& utt : corpus.dev)
    write_record(utt, SplitId::dev, utt.labels ? &*utt.labels : nullptr);
  for (const auto& utt : corpus.test)
    write_record(utt, SplitId::test, utt.labels ? &*utt.labels : nullptr);
  require(os.good(), "save_corpus: write failed for " + path);
}

inline Corpus load_corpus(const std::string& path) {
  auto is = io::open_input(path);
  io::Reader r(is, "corpus '" + path + "'");
  const nlohmann::json header = io::read_header(r, kCorpusFormatVersion);

  Corpus corpus;
  try {
    corpus.spec = CorpusSpec::from_json(header.at("spec"));
    corpus.vocab.tokens = header.at("vocab").at("tokens").get<std::vector<std::string>>();
    corpus.vocab.blank_index = header.at("vocab").at("blank_index").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(r.context() + ": malformed header: " + e.what());
  }
  corpus.spec.validate();
  corpus.vocab.validate();

  const std::size_t counts[4] = {header.at("splits").at("supervised").get<std::size_t>(),
                                 header.at("splits").at("unsupervised").get<std::size_t>(),
                                 header.at("splits").at("dev").get<std::size_t>(),
                                 header.at("splits").at("test").get<std::size_t>()};
  std::map<std::string, std::vector<int>> hidden;
  std::map<std::string, bool> seen_ids;

  for (int s = 0; s < 4; ++s) {
    const auto split = static_cast<SplitId>(s);
    for (std::size_t i = 0; i < counts[s]; ++i) {
      r.set_context("corpus '" + path + "' record " + std::string(split_name(split)) + "[" +
                    std::to_string(i) + "]");
      Utterance utt;
      utt.id = r.string();
      r.set_context("corpus '" + path + "' record '" + utt.id + "'");
      require(!seen_ids[utt.id], r.context() + ": duplicate utterance id");
      seen_ids[utt.id] = true;
      const auto stored_split = static_cast<SplitId>(r.u8());
      require(stored_split == split, r.context() + ": record split does not match split index");
      const int T = static_cast<int>(r.u32());
      const int D = static_cast<int>(r.u32());
      require(T >= 1 && D >= 1, r.context() + ": empty feature matrix");
      require(D == corpus.spec.feature_dim, r.context() + ": feature dim disagrees with spec");
      utt.features = MatF(T, D);
      for (float& v : utt.features.storage()) v = r.f32();
      const bool has_labels = r.u8() != 0;
      std::vector<int> labels;
      if (has_labels) {
        const std::uint32_t len = r.u32();
        require(len >= 1 && len <= (1u << 20), r.context() + ": bad label length");
        labels.resize(len);
        for (auto& l : labels) {
          l = static_cast<int>(r.u32());
          require(l >= 0 && l < corpus.vocab.size(), r.context() + ": label index out of range");
          require(l != corpus.vocab.blank_index,
                  r.context() + ": blank token appears in a label sequence");
        }
      }
      switch (split) {
        case SplitId::supervised:
          require(has_labels, r.context() + ": supervised utterance without labels");
          utt.labels = std::move(labels);
          corpus.supervised.push_back(std::move(utt));
          break;
        case SplitId::unsupervised:
          if (has_labels) hidden[utt.id] = std::move(labels);
          corpus.unsupervised.push_back(std::move(utt));
          break;
        case SplitId::dev:
          require(has_labels, r.context() + ": dev utterance without labels");
          utt.labels = std::move(labels);
          corpus.dev.push_back(std::move(utt));
          break;
        case SplitId::test:
          require(has_labels, r.context() + ": test utterance without labels");
          utt.labels = std::move(labels);
          corpus.test.push_back(std::move(utt));
          break;
      }
    }
  }
  r.set_context("corpus '" + path + "'");
  require(r.at_eof(), r.context() + ": trailing bytes after last record");
  corpus.set_hidden_labels(std::move(hidden));
  return corpus;
}

}  // namespace ctcst
