// ngsgd/kernels.h

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

#ifndef NGSGD_KERNELS_H_
#define NGSGD_KERNELS_H_

// Dense kernels used by the preconditioners, the network and the trainer.
//
// Two implementations share one interface:
//   ngsgd::kernels  OpenMP-parallel, blocked over output rows;
//   ngsgd::serial   straightforward loops, kept as the reference for tests
//                   and as the baseline in bench/.
//
// Every parallel kernel partitions work by output element and reduces each
// element in a fixed order, so results are bitwise independent of the thread
// count.  Whole-matrix reductions (SumSq etc.) are accumulated per row in
// double and then summed serially for the same reason.

#include <span>

#include "ngsgd/matrix.h"

namespace ngsgd {

enum class Trans { kNo, kYes };

namespace kernels {

/// C = beta * C + alpha * op(A) * op(B).  C must already have the result
/// shape.  Supported: (kNo,kNo), (kNo,kYes), (kYes,kNo).
template <typename Real>
void Gemm(Real alpha, const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
          Trans tb, Real beta, Matrix<Real> *c);

/// Returns op(A) * op(B).
template <typename Real>
Matrix<Real> MatMul(const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
                    Trans tb);

/// out[i] = squared 2-norm of row i.
template <typename Real>
void RowSqNorms(const Matrix<Real> &m, std::span<Real> out);

/// Sum of squared elements, i.e. tr(M^T M), accumulated in double.
template <typename Real>
double SumSq(const Matrix<Real> &m);

/// Y += alpha * X.
template <typename Real>
void Axpy(Real alpha, const Matrix<Real> &x, Matrix<Real> *y);

/// Row i of M is multiplied by scale[i].
template <typename Real>
void ScaleRows(std::span<const Real> scale, Matrix<Real> *m);

}  // namespace kernels

namespace serial {

template <typename Real>
void Gemm(Real alpha, const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
          Trans tb, Real beta, Matrix<Real> *c);

template <typename Real>
Matrix<Real> MatMul(const Matrix<Real> &a, Trans ta, const Matrix<Real> &b,
                    Trans tb);

template <typename Real>
void RowSqNorms(const Matrix<Real> &m, std::span<Real> out);

template <typename Real>
double SumSq(const Matrix<Real> &m);

template <typename Real>
void Axpy(Real alpha, const Matrix<Real> &x, Matrix<Real> *y);

template <typename Real>
void ScaleRows(std::span<const Real> scale, Matrix<Real> *m);

}  // namespace serial

/// Number of OpenMP threads the parallel kernels will use.
int KernelThreads();

}  // namespace ngsgd

#endif  // NGSGD_KERNELS_H_
