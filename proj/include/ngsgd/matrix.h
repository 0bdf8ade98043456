// ngsgd/matrix.h

// Copyright 2026 The ngsgd Authors
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

#ifndef NGSGD_MATRIX_H_
#define NGSGD_MATRIX_H_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ngsgd/common.h"

namespace ngsgd {

/// Dense row-major matrix with explicit dimensions.  This is the carrier for
/// minibatches, weights and activations.  Storage is contiguous so a row is a
/// plain span.
template <typename Real>
class Matrix {
 public:
  using value_type = Real;

  Matrix() = default;
  Matrix(Index rows, Index cols, Real fill = Real(0))
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows * cols), fill) {
    if (rows < 0 || cols < 0) throw Error("Matrix: negative dimension");
  }

  /// Row-major initializer, mainly for tests: Matrix<double>({{1, 2}, {3, 4}}).
  Matrix(std::initializer_list<std::initializer_list<Real>> rows) {
    rows_ = static_cast<Index>(rows.size());
    cols_ = rows_ == 0 ? 0 : static_cast<Index>(rows.begin()->size());
    data_.reserve(static_cast<std::size_t>(rows_ * cols_));
    for (const auto &r : rows) {
      if (static_cast<Index>(r.size()) != cols_)
        throw Error("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  template <typename Other>
  static Matrix Cast(const Matrix<Other> &m) {
    Matrix out(m.rows(), m.cols());
    std::transform(m.values().begin(), m.values().end(), out.data(),
                   [](Other v) { return static_cast<Real>(v); });
    return out;
  }

  static Matrix Identity(Index n) {
    Matrix out(n, n);
    for (Index i = 0; i < n; i++) out(i, i) = Real(1);
    return out;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  Real &operator()(Index r, Index c) { return data_[r * cols_ + c]; }
  Real operator()(Index r, Index c) const { return data_[r * cols_ + c]; }

  Real *data() { return data_.data(); }
  const Real *data() const { return data_.data(); }

  std::span<Real> row(Index r) {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const Real> row(Index r) const {
    return {data_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  void Resize(Index rows, Index cols, Real fill = Real(0)) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(static_cast<std::size_t>(rows * cols), fill);
  }
  void SetZero() { std::fill(data_.begin(), data_.end(), Real(0)); }
  void Scale(Real alpha) {
    for (Real &v : data_) v *= alpha;
  }

  Matrix Transpose() const {
    Matrix out(cols_, rows_);
    for (Index r = 0; r < rows_; r++)
      for (Index c = 0; c < cols_; c++) out(c, r) = (*this)(r, c);
    return out;
  }

  bool AllFinite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](Real v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix &a, const Matrix &b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  Index rows_ = 0, cols_ = 0;
  std::vector<Real> data_;
};

template <typename Real>
using Vector = std::vector<Real>;

}  // namespace ngsgd

#endif  // NGSGD_MATRIX_H_
