// ngsgd/ng-simple.cc

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

#include "ngsgd/ng-simple.h"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "ngsgd/kernels.h"

namespace ngsgd {

namespace {

template <typename Real>
using RowMajorMap = Eigen::Map<
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Real>
using ConstRowMajorMap = Eigen::Map<
    const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Solves S Z = B for symmetric positive definite S (n x n), where B and Z are
// given as row-major n x m buffers.
template <typename Real>
void CholeskySolve(const Matrix<Real> &s, const Real *b, Real *z, Index m) {
  const Index n = s.rows();
  ConstRowMajorMap<Real> smap(s.data(), n, n);
  Eigen::LLT<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>> llt(smap);
  if (llt.info() != Eigen::Success)
    throw Error("simple natural gradient: smoothed Fisher is not positive "
                "definite");
  ConstRowMajorMap<Real> bmap(b, n, m);
  RowMajorMap<Real> zmap(z, n, m);
  zmap = llt.solve(bmap);
}

template <typename Real>
void CheckInput(const Matrix<Real> &x) {
  if (x.rows() < 2)
    throw Error("PreconditionSimple: need at least 2 rows to hold one out");
  if (x.cols() < 1) throw Error("PreconditionSimple: zero columns");
  if (!x.AllFinite()) throw Error("PreconditionSimple: non-finite input");
}

}  // namespace

void SimpleNgConfig::Check() const {
  if (!(alpha >= 0)) throw Error("SimpleNgConfig: alpha must be >= 0");
  if (!(epsilon > 0)) throw Error("SimpleNgConfig: epsilon must be > 0");
}

template <typename Real>
double SimpleBeta(const Matrix<Real> &x, const SimpleNgConfig &cfg) {
  if (x.rows() < 1 || x.cols() < 1) throw Error("SimpleBeta: empty input");
  double tr = kernels::SumSq(x);
  return cfg.alpha * std::max(tr, cfg.epsilon) /
         (double(x.rows()) * double(x.cols()));
}

template <typename Real>
Matrix<Real> SimpleQColumnSpace(const Matrix<Real> &x, double beta,
                                Matrix<Real> *system) {
  const Index n = x.rows(), d = x.cols();
  Matrix<Real> g(d, d);
  kernels::Gemm(Real(1.0 / (n - 1)), x, Trans::kYes, x, Trans::kNo, Real(0),
                &g);
  for (Index i = 0; i < d; i++) g(i, i) += Real(beta);
  // Q = X G^{-1}, i.e. Q^T = G^{-1} X^T.
  Matrix<Real> xt = x.Transpose();
  Matrix<Real> qt(d, n);
  CholeskySolve(g, xt.data(), qt.data(), n);
  if (system) *system = std::move(g);
  return qt.Transpose();
}

template <typename Real>
Matrix<Real> SimpleQRowSpace(const Matrix<Real> &x, double beta,
                             Matrix<Real> *system) {
  const Index n = x.rows(), d = x.cols();
  Matrix<Real> m(n, n);
  kernels::Gemm(Real(1.0 / (n - 1)), x, Trans::kNo, x, Trans::kYes, Real(0),
                &m);
  for (Index i = 0; i < n; i++) m(i, i) += Real(beta);
  Matrix<Real> q(n, d);
  CholeskySolve(m, x.data(), q.data(), d);
  if (system) *system = std::move(m);
  return q;
}

template <typename Real>
PrecondOutput<Real> PreconditionSimple(const Matrix<Real> &x,
                                       const SimpleNgConfig &cfg,
                                       SimpleWorkspace<Real> *ws) {
  cfg.Check();
  CheckInput(x);
  const Index n = x.rows(), d = x.cols();
  const double beta = SimpleBeta(x, cfg);
  const double tr_x = kernels::SumSq(x);

  Matrix<Real> system;
  const bool row_space = !(n > d);
  Matrix<Real> q = row_space ? SimpleQRowSpace(x, beta, &system)
                             : SimpleQColumnSpace(x, beta, &system);

  // Mathematically a_i < N - 1; the clamp keeps the denominator positive
  // under roundoff.
  const double a_max = double(n - 1) * (1.0 - 1e-6);
  Vector<Real> a(n), b(n);
  for (Index i = 0; i < n; i++) {
    double ai = 0;
    auto xi = x.row(i);
    auto qi = q.row(i);
    for (Index j = 0; j < d; j++) ai += double(xi[j]) * double(qi[j]);
    ai = std::min(ai, a_max);
    double correction = ai / (double(n - 1) - ai);
    if (cfg.inject_fault) correction = -correction;
    a[i] = Real(ai);
    b[i] = Real(1.0 + correction);
  }

  PrecondOutput<Real> out;
  out.x_bar = q;
  kernels::ScaleRows<Real>(b, &out.x_bar);
  if (ws) ws->x_hat = out.x_bar;

  const double tr_hat = kernels::SumSq(out.x_bar);
  out.gamma = tr_hat > 0 ? Real(std::sqrt(tr_x / tr_hat)) : Real(1);
  out.x_bar.Scale(out.gamma);
  out.row_sq_norms.resize(n);
  kernels::RowSqNorms<Real>(out.x_bar, out.row_sq_norms);

  if (ws) {
    ws->beta = beta;
    ws->row_space = row_space;
    ws->system = std::move(system);
    ws->q = std::move(q);
    ws->a = std::move(a);
    ws->b = std::move(b);
  }
  return out;
}

#define NGSGD_INSTANTIATE_SIMPLE(Real)                                        \
  template double SimpleBeta<Real>(const Matrix<Real> &,                     \
                                   const SimpleNgConfig &);                  \
  template Matrix<Real> SimpleQColumnSpace<Real>(const Matrix<Real> &, double, \
                                                 Matrix<Real> *);            \
  template Matrix<Real> SimpleQRowSpace<Real>(const Matrix<Real> &, double,  \
                                              Matrix<Real> *);               \
  template PrecondOutput<Real> PreconditionSimple<Real>(                     \
      const Matrix<Real> &, const SimpleNgConfig &, SimpleWorkspace<Real> *);

NGSGD_INSTANTIATE_SIMPLE(float)
NGSGD_INSTANTIATE_SIMPLE(double)

}  // namespace ngsgd
