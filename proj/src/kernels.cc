// ngsgd/kernels.cc

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

#include "ngsgd/kernels.h"

#include <omp.h>

#include <algorithm>
#include <string>
#include <vector>

namespace ngsgd {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr Index kParallelWork = 32 * 1024;

template <typename Real>
void CheckGemmDims(const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
                   Trans tb, const Matrix<Real> &c) {
  Index m = ta == Trans::kNo ? a.rows() : a.cols();
  Index k = ta == Trans::kNo ? a.cols() : a.rows();
  Index k2 = tb == Trans::kNo ? b.rows() : b.cols();
  Index n = tb == Trans::kNo ? b.cols() : b.rows();
  if (k != k2 || c.rows() != m || c.cols() != n)
    throw Error("Gemm: dimension mismatch (" + std::to_string(m) + "x" +
                std::to_string(k) + " * " + std::to_string(k2) + "x" +
                std::to_string(n) + " -> " + std::to_string(c.rows()) + "x" +
                std::to_string(c.cols()) + ")");
  if (ta == Trans::kYes && tb == Trans::kYes)
    throw Error("Gemm: transposing both operands is not supported");
}

// Dot product with eight independent partial sums; the fixed lane structure
// lets the compiler vectorize it without reassociation flags, and the result
// depends only on the inputs.
template <typename Real>
inline Real Dot(const Real *x, const Real *y, Index n) {
  Real acc[8] = {};
  Index i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; l++) acc[l] += x[i + l] * y[i + l];
  Real tail = 0;
  for (; i < n; i++) tail += x[i] * y[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// C = beta C + alpha A B with A(i, p) = a[i * a_rs + p * a_cs] (m x k), B
// row-major k x n and C row-major m x n.  C is cut into kMr x kNr tiles whose
// accumulators stay in registers; every element is summed over p in
// ascending order, so the result does not depend on how tiles are spread
// over threads.
template <typename Real>
void TiledGemm(Index m, Index n, Index k, Real alpha, const Real *a,
               Index a_rs, Index a_cs, const Real *b, Real beta, Real *c,
               bool par) {
  constexpr Index kMr = 4;
  constexpr Index kNr = 128 / sizeof(Real);
  const Index row_tiles = (m + kMr - 1) / kMr;
  const Index col_tiles = (n + kNr - 1) / kNr;
#pragma omp parallel for schedule(static) if (par)
  for (Index t = 0; t < row_tiles * col_tiles; t++) {
    const Index i0 = (t / col_tiles) * kMr, j0 = (t % col_tiles) * kNr;
    const Index mr = std::min(kMr, m - i0), nr = std::min(kNr, n - j0);
    Real acc[kMr][kNr] = {};
    if (mr == kMr && nr == kNr) {
      for (Index p = 0; p < k; p++) {
        const Real *brow = b + p * n + j0;
        for (Index r = 0; r < kMr; r++) {
          const Real av = a[(i0 + r) * a_rs + p * a_cs];
#pragma omp simd
          for (Index j = 0; j < kNr; j++) acc[r][j] += av * brow[j];
        }
      }
    } else {
      for (Index p = 0; p < k; p++) {
        const Real *brow = b + p * n + j0;
        for (Index r = 0; r < mr; r++) {
          const Real av = a[(i0 + r) * a_rs + p * a_cs];
          for (Index j = 0; j < nr; j++) acc[r][j] += av * brow[j];
        }
      }
    }
    for (Index r = 0; r < mr; r++) {
      Real *crow = c + (i0 + r) * n + j0;
      if (beta == Real(0)) {
        for (Index j = 0; j < nr; j++) crow[j] = alpha * acc[r][j];
      } else {
        for (Index j = 0; j < nr; j++)
          crow[j] = beta * crow[j] + alpha * acc[r][j];
      }
    }
  }
}

}  // namespace

int KernelThreads() { return omp_get_max_threads(); }

namespace kernels {

template <typename Real>
void Gemm(Real alpha, const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
          Trans tb, Real beta, Matrix<Real> *c) {
  CheckGemmDims(a, ta, b, tb, *c);
  const Index m = c->rows(), n = c->cols();
  const Index k = ta == Trans::kNo ? a.cols() : a.rows();
  // The micro-kernel wants B as k x n row-major; pack B^T if needed.
  Matrix<Real> packed;
  const Real *bd = b.data();
  if (tb == Trans::kYes) {
    packed.Resize(k, n);
    for (Index j = 0; j < n; j++)
      for (Index p = 0; p < k; p++) packed(p, j) = b(j, p);
    bd = packed.data();
  }
  const Index a_rs = ta == Trans::kNo ? k : 1;
  const Index a_cs = ta == Trans::kNo ? 1 : m;
  TiledGemm(m, n, k, alpha, a.data(), a_rs, a_cs, bd, beta, c->data(),
            m * n * k >= kParallelWork);
}

template <typename Real>
Matrix<Real> MatMul(const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
                    Trans tb) {
  Matrix<Real> c(ta == Trans::kNo ? a.rows() : a.cols(),
                 tb == Trans::kNo ? b.cols() : b.rows());
  Gemm(Real(1), a, ta, b, tb, Real(0), &c);
  return c;
}

template <typename Real>
void RowSqNorms(const Matrix<Real> &m, std::span<Real> out) {
  if (static_cast<Index>(out.size()) != m.rows())
    throw Error("RowSqNorms: output size mismatch");
  const Index cols = m.cols();
#pragma omp parallel for schedule(static) if (m.size() >= kParallelWork)
  for (Index i = 0; i < m.rows(); i++) {
    const Real *r = m.data() + i * cols;
    out[i] = Dot(r, r, cols);
  }
}

template <typename Real>
double SumSq(const Matrix<Real> &m) {
  std::vector<double> per_row(static_cast<std::size_t>(m.rows()));
  const Index cols = m.cols();
#pragma omp parallel for schedule(static) if (m.size() >= kParallelWork)
  for (Index i = 0; i < m.rows(); i++) {
    const Real *r = m.data() + i * cols;
    double s = 0;
    for (Index j = 0; j < cols; j++) s += double(r[j]) * double(r[j]);
    per_row[i] = s;
  }
  double total = 0;
  for (double s : per_row) total += s;
  return total;
}

template <typename Real>
void Axpy(Real alpha, const Matrix<Real> &x, Matrix<Real> *y) {
  if (x.rows() != y->rows() || x.cols() != y->cols())
    throw Error("Axpy: dimension mismatch");
  const Index n = x.size();
  const Real *xd = x.data();
  Real *yd = y->data();
#pragma omp parallel for simd schedule(static) if (n >= kParallelWork)
  for (Index i = 0; i < n; i++) yd[i] += alpha * xd[i];
}

template <typename Real>
void ScaleRows(std::span<const Real> scale, Matrix<Real> *m) {
  if (static_cast<Index>(scale.size()) != m->rows())
    throw Error("ScaleRows: size mismatch");
  const Index cols = m->cols();
#pragma omp parallel for schedule(static) if (m->size() >= kParallelWork)
  for (Index i = 0; i < m->rows(); i++) {
    Real *r = m->data() + i * cols;
    for (Index j = 0; j < cols; j++) r[j] *= scale[i];
  }
}

#define NGSGD_INSTANTIATE_KERNELS(Real)                                      \
  template void Gemm<Real>(Real, const Matrix<Real> &, Trans,                \
                           const Matrix<Real> &, Trans, Real, Matrix<Real> *); \
  template Matrix<Real> MatMul<Real>(const Matrix<Real> &, Trans,            \
                                     const Matrix<Real> &, Trans);           \
  template void RowSqNorms<Real>(const Matrix<Real> &, std::span<Real>);     \
  template double SumSq<Real>(const Matrix<Real> &);                         \
  template void Axpy<Real>(Real, const Matrix<Real> &, Matrix<Real> *);      \
  template void ScaleRows<Real>(std::span<const Real>, Matrix<Real> *);

NGSGD_INSTANTIATE_KERNELS(float)
NGSGD_INSTANTIATE_KERNELS(double)

}  // namespace kernels

namespace serial {

template <typename Real>
void Gemm(Real alpha, const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
          Trans tb, Real beta, Matrix<Real> *c) {
  CheckGemmDims(a, ta, b, tb, *c);
  const Index k = ta == Trans::kNo ? a.cols() : a.rows();
  for (Index i = 0; i < c->rows(); i++) {
    for (Index j = 0; j < c->cols(); j++) {
      Real sum = 0;
      for (Index p = 0; p < k; p++) {
        Real av = ta == Trans::kNo ? a(i, p) : a(p, i);
        Real bv = tb == Trans::kNo ? b(p, j) : b(j, p);
        sum += av * bv;
      }
      (*c)(i, j) = (beta == Real(0) ? Real(0) : beta * (*c)(i, j)) + alpha * sum;
    }
  }
}

template <typename Real>
Matrix<Real> MatMul(const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
                    Trans tb) {
  Matrix<Real> c(ta == Trans::kNo ? a.rows() : a.cols(),
                 tb == Trans::kNo ? b.cols() : b.rows());
  Gemm(Real(1), a, ta, b, tb, Real(0), &c);
  return c;
}

template <typename Real>
void RowSqNorms(const Matrix<Real> &m, std::span<Real> out) {
  if (static_cast<Index>(out.size()) != m.rows())
    throw Error("RowSqNorms: output size mismatch");
  for (Index i = 0; i < m.rows(); i++) {
    Real s = 0;
    for (Real v : m.row(i)) s += v * v;
    out[i] = s;
  }
}

template <typename Real>
double SumSq(const Matrix<Real> &m) {
  double s = 0;
  for (Real v : m.values()) s += double(v) * double(v);
  return s;
}

template <typename Real>
void Axpy(Real alpha, const Matrix<Real> &x, Matrix<Real> *y) {
  if (x.rows() != y->rows() || x.cols() != y->cols())
    throw Error("Axpy: dimension mismatch");
  for (Index i = 0; i < x.size(); i++) y->data()[i] += alpha * x.data()[i];
}

template <typename Real>
void ScaleRows(std::span<const Real> scale, Matrix<Real> *m) {
  if (static_cast<Index>(scale.size()) != m->rows())
    throw Error("ScaleRows: size mismatch");
  for (Index i = 0; i < m->rows(); i++)
    for (Real &v : m->row(i)) v *= scale[i];
}

NGSGD_INSTANTIATE_KERNELS(float)
NGSGD_INSTANTIATE_KERNELS(double)

}  // namespace serial

}  // namespace ngsgd
