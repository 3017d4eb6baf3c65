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

#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

namespace ctcst {

// Dense row-major matrix. Feature matrices and model weights are Mat<float>;
// the CTC kernel and the gradient-check oracles run on Mat<double>.
template <typename S>
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, S fill = S(0))
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    assert(rows >= 0 && cols >= 0);
  }

  static Mat from_rows(std::initializer_list<std::initializer_list<S>> rows) {
    Mat m(static_cast<int>(rows.size()), rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows) {
      assert(static_cast<int>(row.size()) == m.cols_);
      int c = 0;
      for (S v : row) m(r, c++) = v;
      ++r;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  S operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  S* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const S* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  std::span<S> row_span(int r) { return {row(r), static_cast<std::size_t>(cols_)}; }
  std::span<const S> row_span(int r) const { return {row(r), static_cast<std::size_t>(cols_)}; }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& storage() { return data_; }
  const std::vector<S>& storage() const { return data_; }

  void fill(S v) { data_.assign(data_.size(), v); }

  template <typename T>
  Mat<T> cast() const {
    Mat<T> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<T>(data_[i]);
    return out;
  }

  bool all_finite() const {
    for (S v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<S> data_;
};

using MatF = Mat<float>;
using MatD = Mat<double>;

}  // namespace ctcst
