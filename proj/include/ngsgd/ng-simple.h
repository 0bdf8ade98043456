// ngsgd/ng-simple.h

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

#ifndef NGSGD_NG_SIMPLE_H_
#define NGSGD_NG_SIMPLE_H_

#include "ngsgd/matrix.h"

namespace ngsgd {

struct SimpleNgConfig {
  double alpha = 4.0;     // identity-smoothing strength
  double epsilon = 1e-20; // floor on tr(X^T X) inside beta
  // Test hook for the verify battery: flips the sign of the hold-out
  // correction in b_i.  Never set in training.
  bool inject_fault = false;

  void Check() const;
};

/// Output of either preconditioner: the rescaled minibatch, the rescale
/// factor gamma, and the squared norm of every output row (used by the
/// max-change guard).
template <typename Real>
struct PrecondOutput {
  Matrix<Real> x_bar;
  Real gamma = 1;
  Vector<Real> row_sq_norms;
};

/// Intermediate quantities of the simple method, exposed for tests.
template <typename Real>
struct SimpleWorkspace {
  double beta = 0;
  bool row_space = false;  // which formula produced q
  Matrix<Real> system;     // D x D smoothed Fisher G, or N x N in row space
  Matrix<Real> q;          // X G^{-1}
  Vector<Real> a, b;
  Matrix<Real> x_hat;
};

/// beta = alpha * max(tr(X^T X), epsilon) / (N D).
template <typename Real>
double SimpleBeta(const Matrix<Real> &x, const SimpleNgConfig &cfg);

/// Q = X (beta I + X^T X / (N-1))^{-1}, solved in the D x D column space.
template <typename Real>
Matrix<Real> SimpleQColumnSpace(const Matrix<Real> &x, double beta,
                                Matrix<Real> *system = nullptr);

/// Same Q via (beta I + X X^T / (N-1))^{-1} X, solved in the N x N row space.
template <typename Real>
Matrix<Real> SimpleQRowSpace(const Matrix<Real> &x, double beta,
                             Matrix<Real> *system = nullptr);

/// Multiplies each row x_i of X by the inverse of the smoothed Fisher factor
/// estimated from the other rows of X, then rescales the result to the
/// Frobenius norm of X.  The held-out inverse is never formed: with
/// Q = X G^{-1} and a_i = x_i^T q_i, the held-out row is
/// x_hat_i = (1 + a_i / (N - 1 - a_i)) q_i.  The column-space formula is used
/// when N > D, the row-space one otherwise.  Requires N >= 2.
template <typename Real>
PrecondOutput<Real> PreconditionSimple(const Matrix<Real> &x,
                                       const SimpleNgConfig &cfg,
                                       SimpleWorkspace<Real> *ws = nullptr);

}  // namespace ngsgd

#endif  // NGSGD_NG_SIMPLE_H_
