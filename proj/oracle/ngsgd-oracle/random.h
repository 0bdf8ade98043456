// ngsgd-oracle/random.h

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

#ifndef NGSGD_ORACLE_RANDOM_H_
#define NGSGD_ORACLE_RANDOM_H_

// Random test inputs shared by the verify battery, unit tests and
// acceptance checks.

#include <cmath>
#include <random>

#include "ngsgd/matrix.h"

namespace ngsgd::oracle {

template <typename Real = double>
Matrix<Real> RandomGaussian(Index rows, Index cols, std::mt19937_64 *rng,
                            double stddev = 1.0) {
  std::normal_distribution<double> g(0.0, stddev);
  Matrix<Real> m(rows, cols);
  for (Real &v : m.values()) v = Real(g(*rng));
  return m;
}

/// Rows drawn from a zero-mean Gaussian with a random, strongly anisotropic
/// covariance (column scales decay geometrically after a random rotation),
/// so that a low-rank covariance estimate has something to find.
template <typename Real = double>
Matrix<Real> RandomCorrelated(Index rows, Index cols, std::mt19937_64 *rng,
                              const Matrix<double> &mixing) {
  Matrix<double> z = RandomGaussian<double>(rows, cols, rng);
  Matrix<Real> out(rows, cols);
  for (Index i = 0; i < rows; i++)
    for (Index j = 0; j < cols; j++) {
      double s = 0;
      for (Index k = 0; k < cols; k++) s += z(i, k) * mixing(k, j);
      out(i, j) = Real(s);
    }
  return out;
}

inline Matrix<double> RandomMixing(Index dim, std::mt19937_64 *rng,
                                   double decay = 0.7) {
  Matrix<double> m = RandomGaussian<double>(dim, dim, rng);
  for (Index i = 0; i < dim; i++) {
    const double s = std::pow(decay, double(i));
    for (Index j = 0; j < dim; j++) m(i, j) *= s;
  }
  return m;
}

}  // namespace ngsgd::oracle

#endif  // NGSGD_ORACLE_RANDOM_H_
