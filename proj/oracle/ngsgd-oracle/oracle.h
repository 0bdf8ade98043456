// ngsgd-oracle/oracle.h

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

#ifndef NGSGD_ORACLE_ORACLE_H_
#define NGSGD_ORACLE_ORACLE_H_

// Brute-force reference implementations.  These form every D x D matrix the
// efficient code avoids and apply the defining equations literally.  They
// share no code with the library beyond the data types, and are meant for
// small dimensions only.

#include <cstdint>
#include <span>

#include "ngsgd/ng-online.h"
#include "ngsgd/ng-simple.h"
#include "ngsgd/nnet.h"

namespace ngsgd::oracle {

/// For every row i, x_hat_i = G_i^{-1} x_i with
/// G_i = beta I + 1/(N-1) sum_{j != i} x_j x_j^T, inverted explicitly; then
/// the usual Frobenius rescale.
PrecondOutput<double> PreconditionSimpleOracle(const Matrix<double> &x,
                                               const SimpleNgConfig &cfg);

/// Online preconditioner through explicit F_t = R^T D R + rho I, the
/// smoothed G_t, T_t = eta/N X^T X + (1-eta) F_t, Y_t = R_t T_t and
/// Z_t = Y_t Y_t^T.  Same floors and the same repair policy as the library.
/// `tr_t`, if given, receives tr(T_t) (update branch only).
PrecondOutput<double> PreconditionOnlineOracle(const Matrix<double> &x,
                                               bool update,
                                               OnlineNgState<double> *state,
                                               double *tr_t = nullptr);

/// Central-difference gradient of Objective() w.r.t. the weights of `layer`.
Matrix<double> NumericGradient(const Network<double> &net,
                               const Matrix<double> &x,
                               std::span<const std::int32_t> labels,
                               std::size_t layer, double h);

/// Largest per-parameter relative error between the backprop gradient and
/// central differences over all layers: |a - n| / max(|a|, |n|, 1e-8).
double GradientCheck(const Network<double> &net, const Matrix<double> &x,
                     std::span<const std::int32_t> labels, double h);

/// max_ij |a - b| / max(max_ij |b|, floor).
double MaxRelError(const Matrix<double> &a, const Matrix<double> &b,
                   double floor = 1e-300);

}  // namespace ngsgd::oracle

#endif  // NGSGD_ORACLE_ORACLE_H_
