// ngsgd/ng-online.cc

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

#include "ngsgd/ng-online.h"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "ngsgd/binary-io.h"
#include "ngsgd/kernels.h"

namespace ngsgd {

namespace {

using EigenMat = Eigen::MatrixXd;

constexpr double kOrthoThreshold = 1e-3;
constexpr double kConditionThreshold = 1e6;

template <typename Real>
EigenMat ToEigen(const Matrix<Real> &m) {
  EigenMat out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); i++)
    for (Index j = 0; j < m.cols(); j++) out(i, j) = m(i, j);
  return out;
}

Matrix<double> FromEigen(const EigenMat &m) {
  Matrix<double> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); i++)
    for (Index j = 0; j < m.cols(); j++) out(i, j) = m(i, j);
  return out;
}

// e_ii = 1 / (beta / d_ii + 1)
Vector<double> ComputeE(std::span<const double> d, double beta) {
  Vector<double> e(d.size());
  for (std::size_t i = 0; i < d.size(); i++) e[i] = 1.0 / (beta / d[i] + 1.0);
  return e;
}

double BetaFrom(double rho, std::span<const double> d, double alpha,
                Index dim) {
  double tr_d = 0;
  for (double v : d) tr_d += v;
  return rho * (1.0 + alpha) + alpha * tr_d / double(dim);
}

template <typename Real>
Vector<double> DiagAsDouble(const OnlineNgState<Real> &s) {
  return Vector<double>(s.d.begin(), s.d.end());
}

template <typename Real>
void CheckMinibatch(const OnlineNgState<Real> &state, const Matrix<Real> &x) {
  if (x.cols() != state.dim())
    throw Error("online natural gradient: minibatch has " +
                std::to_string(x.cols()) + " columns, state has dimension " +
                std::to_string(state.dim()));
  if (x.rows() < 1) throw Error("online natural gradient: empty minibatch");
  if (!x.AllFinite())
    throw Error("online natural gradient: non-finite input");
}

// The output half shared by both branches: x_bar = gamma * x_hat and the
// scaled per-row squared norms.
template <typename Real>
PrecondOutput<Real> Finish(Matrix<Real> x_hat, double tr_x, double *tr_x_hat) {
  PrecondOutput<Real> out;
  const Index n = x_hat.rows();
  Vector<Real> p(n);
  kernels::RowSqNorms<Real>(x_hat, p);
  double tr_hat = 0;
  for (Real v : p) tr_hat += v;
  if (tr_x_hat) *tr_x_hat = tr_hat;
  double gamma = tr_hat > 0 ? std::sqrt(std::max(tr_x, 0.0) / tr_hat) : 1.0;
  out.gamma = Real(gamma);
  x_hat.Scale(out.gamma);
  out.x_bar = std::move(x_hat);
  out.row_sq_norms.resize(n);
  const Real g2 = out.gamma * out.gamma;
  for (Index i = 0; i < n; i++) out.row_sq_norms[i] = g2 * p[i];
  return out;
}

}  // namespace

void OnlineNgConfig::Check() const {
  if (rank < 1) throw Error("OnlineNgConfig: rank must be >= 1");
  if (!(alpha >= 0)) throw Error("OnlineNgConfig: alpha must be >= 0");
  if (!(s_samples > 0)) throw Error("OnlineNgConfig: s_samples must be > 0");
  if (update_period < 1)
    throw Error("OnlineNgConfig: update_period must be >= 1");
  if (!(epsilon > 0)) throw Error("OnlineNgConfig: epsilon must be > 0");
  if (always_update_first < 0)
    throw Error("OnlineNgConfig: always_update_first must be >= 0");
}

double EtaFrom(Index n, double s_samples) {
  if (n < 1 || !(s_samples > 0)) throw Error("EtaFrom: need n >= 1, S > 0");
  return -std::expm1(-double(n) / s_samples);
}

template <typename Real>
double OnlineNgState<Real>::Beta() const {
  return BetaFrom(rho, DiagAsDouble(*this), cfg.alpha, dim());
}

template <typename Real>
Vector<double> OnlineNgState<Real>::E() const {
  return ComputeE(DiagAsDouble(*this), Beta());
}

template <typename Real>
double OnlineNgState<Real>::TraceF() const {
  double tr = 0;
  for (Real v : d) tr += v;
  return tr + double(dim()) * rho;
}

template <typename Real>
OnlineNgState<Real> InitOnlineState(const Matrix<Real> &x0,
                                    const OnlineNgConfig &cfg) {
  cfg.Check();
  const Index n = x0.rows(), dim = x0.cols();
  if (dim < 2)
    throw Error("InitOnlineState: dimension must be >= 2 (rank < dim)");
  if (n < 1) throw Error("InitOnlineState: empty minibatch");
  if (!x0.AllFinite()) throw Error("InitOnlineState: non-finite input");
  const Index rank = std::min<Index>(cfg.rank, dim - 1);

  Matrix<Real> s0(dim, dim);
  kernels::Gemm(Real(1.0 / n), x0, Trans::kYes, x0, Trans::kNo, Real(0), &s0);
  EigenMat s = ToEigen(s0);
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<EigenMat> eig(s);
  if (eig.info() != Eigen::Success)
    throw Error("InitOnlineState: eigendecomposition failed");
  // Eigen sorts ascending; we want the top `rank`, largest first.
  const auto &evals = eig.eigenvalues();
  const auto &evecs = eig.eigenvectors();

  double sum_top = 0;
  for (Index i = 0; i < rank; i++) sum_top += evals(dim - 1 - i);
  const double eps = cfg.epsilon;
  const double rho = std::max((s.trace() - sum_top) / double(dim - rank), eps);

  Vector<double> d(rank);
  for (Index i = 0; i < rank; i++)
    d[i] = std::max(eps, evals(dim - 1 - i) - rho);

  OnlineNgState<Real> state;
  state.cfg = cfg;
  state.rho = Real(rho);
  state.d.assign(d.begin(), d.end());
  // Use the stored (possibly rounded) values so that W is consistent with
  // what later steps will derive E from.
  Vector<double> e = ComputeE(DiagAsDouble(state),
                              BetaFrom(state.rho, DiagAsDouble(state),
                                       cfg.alpha, dim));
  state.w.Resize(rank, dim);
  for (Index i = 0; i < rank; i++) {
    const double se = std::sqrt(e[i]);
    for (Index j = 0; j < dim; j++)
      state.w(i, j) = Real(se * evecs(j, dim - 1 - i));
  }
  state.t = 0;
  return state;
}

template <typename Real>
PrecondOutput<Real> ApplyOnline(const OnlineNgState<Real> &state,
                                const Matrix<Real> &x) {
  CheckMinibatch(state, x);
  Matrix<Real> h = kernels::MatMul(x, Trans::kNo, state.w, Trans::kYes);
  const double tr_x = kernels::SumSq(x);
  Matrix<Real> x_hat = x;
  kernels::Gemm(Real(-1), h, Trans::kNo, state.w, Trans::kNo, Real(1), &x_hat);
  return Finish(std::move(x_hat), tr_x, nullptr);
}

template <typename Real>
PrecondOutput<Real> UpdateOnline(const Matrix<Real> &x,
                                 OnlineNgState<Real> *state,
                                 OnlineUpdateWorkspace *ws) {
  CheckMinibatch(*state, x);
  const OnlineNgConfig &cfg = state->cfg;
  const Index n = x.rows(), dim = x.cols(), rank = state->rank();
  const Matrix<Real> &w = state->w;
  const double eta = EtaFrom(n, cfg.s_samples);
  const double rho = state->rho;
  const Vector<double> d = DiagAsDouble(*state);

  Matrix<Real> h = kernels::MatMul(x, Trans::kNo, w, Trans::kYes);  // N x R
  Matrix<Real> j = kernels::MatMul(h, Trans::kYes, x, Trans::kNo);  // R x D

  // The R x R products grow like the fourth power of the data, so they are
  // formed in double.
  Matrix<double> jd = Matrix<double>::Cast(j);
  Matrix<double> k = kernels::MatMul(jd, Trans::kNo, jd, Trans::kYes);
  Matrix<double> l;
  if (n > dim) {
    l = kernels::MatMul(Matrix<double>::Cast(w), Trans::kNo, jd, Trans::kYes);
  } else {
    Matrix<double> hd = Matrix<double>::Cast(h);
    l = kernels::MatMul(hd, Trans::kYes, hd, Trans::kNo);
  }

  const double beta = BetaFrom(rho, d, cfg.alpha, dim);
  const Vector<double> e = ComputeE(d, beta);
  Vector<double> inv_sqrt_e(rank), d_plus_rho(rank);
  for (Index i = 0; i < rank; i++) {
    inv_sqrt_e[i] = 1.0 / std::sqrt(e[i]);
    d_plus_rho[i] = d[i] + rho;
  }

  // Z = eta^2/N^2 E^-.5 K E^-.5 + (1-eta)^2 (D + rho I)^2
  //     + eta(1-eta)/N (E^-.5 L E^-.5 (D + rho I) + (D + rho I) E^-.5 L E^-.5)
  EigenMat z(rank, rank);
  const double kf = eta * eta / (double(n) * double(n));
  const double lf = eta * (1.0 - eta) / double(n);
  for (Index a = 0; a < rank; a++) {
    for (Index b = 0; b < rank; b++) {
      const double scale = inv_sqrt_e[a] * inv_sqrt_e[b];
      double v = kf * scale * k(a, b) +
                 lf * scale * l(a, b) * (d_plus_rho[a] + d_plus_rho[b]);
      if (a == b) v += (1.0 - eta) * (1.0 - eta) * d_plus_rho[a] * d_plus_rho[a];
      z(a, b) = v;
    }
  }
  z = 0.5 * (z + z.transpose());

  Eigen::SelfAdjointEigenSolver<EigenMat> eig(z);
  if (eig.info() != Eigen::Success)
    throw Error("UpdateOnline: eigendecomposition of Z failed");
  Vector<double> c(rank);
  EigenMat u(rank, rank);
  for (Index i = 0; i < rank; i++) {
    c[i] = eig.eigenvalues()(rank - 1 - i);
    u.col(i) = eig.eigenvectors().col(rank - 1 - i);
  }
  const double c_floor = (1.0 - eta) * (1.0 - eta) * rho * rho;
  int num_floored = 0;
  for (double &ci : c) {
    if (ci < c_floor) {
      ci = c_floor;
      num_floored++;
    }
  }
  const bool ill_conditioned = c.front() > kConditionThreshold * c.back();

  // Output.  In the update branch tr(X X^T) comes from quantities we already
  // have: tr(X_hat X_hat^T) - tr(L E) + 2 tr(L).
  Matrix<Real> x_hat = x;
  kernels::Gemm(Real(-1), h, Trans::kNo, w, Trans::kNo, Real(1), &x_hat);
  Vector<Real> p(n);
  kernels::RowSqNorms<Real>(x_hat, p);
  double tr_x_hat = 0;
  for (Real v : p) tr_x_hat += v;
  double tr_le = 0, tr_l = 0;
  for (Index i = 0; i < rank; i++) {
    tr_le += l(i, i) * e[i];
    tr_l += l(i, i);
  }
  const double tr_x = std::max(0.0, tr_x_hat - tr_le + 2.0 * tr_l);
  PrecondOutput<Real> out = Finish(std::move(x_hat), tr_x, nullptr);

  // New rho and D.
  double sum_sqrt_c = 0, tr_d = 0;
  for (double ci : c) sum_sqrt_c += std::sqrt(ci);
  for (double di : d) tr_d += di;
  const double rho_prime =
      (eta / double(n) * tr_x + (1.0 - eta) * (double(dim) * rho + tr_d) -
       sum_sqrt_c) /
      double(dim - rank);
  const double eps = cfg.epsilon;
  bool any_floor = num_floored > 0 || rho_prime < eps;
  Vector<Real> d_new(rank);
  for (Index i = 0; i < rank; i++) {
    double v = std::sqrt(c[i]) - rho_prime;
    if (v < eps) {
      v = eps;
      any_floor = true;
    }
    d_new[i] = Real(v);
  }
  const Real rho_new = Real(std::max(eps, rho_prime));

  // W_{t+1} = A B with
  //   A = eta/N E_{t+1}^.5 C^-.5 U^T E_t^-.5           (R x R)
  //   B = J + N(1-eta)/eta (D_t + rho_t I) W_t          (R x D)
  Vector<double> d_new_d(d_new.begin(), d_new.end());
  const Vector<double> e_new =
      ComputeE(d_new_d, BetaFrom(rho_new, d_new_d, cfg.alpha, dim));
  Matrix<Real> a_fac(rank, rank);
  for (Index a = 0; a < rank; a++)
    for (Index b = 0; b < rank; b++)
      a_fac(a, b) = Real(eta / double(n) * std::sqrt(e_new[a]) /
                         std::sqrt(c[a]) * u(b, a) * inv_sqrt_e[b]);
  Matrix<Real> b_fac = j;
  const double bf = double(n) * (1.0 - eta) / eta;
  for (Index a = 0; a < rank; a++) {
    const Real s = Real(bf * d_plus_rho[a]);
    auto brow = b_fac.row(a);
    auto wrow = w.row(a);
    for (Index col = 0; col < dim; col++) brow[col] += s * wrow[col];
  }
  Matrix<Real> w_new = kernels::MatMul(a_fac, Trans::kNo, b_fac, Trans::kNo);

  if (ws) {
    ws->eta = eta;
    ws->h = Matrix<double>::Cast(h);
    ws->j = std::move(jd);
    ws->k = std::move(k);
    ws->l = std::move(l);
    ws->z = FromEigen(z);
    ws->u = FromEigen(u);
    ws->c = c;
    ws->a_fac = Matrix<double>::Cast(a_fac);
    ws->b_fac = Matrix<double>::Cast(b_fac);
    ws->tr_x = tr_x;
    ws->tr_x_hat = tr_x_hat;
    ws->rho_prime = rho_prime;
    ws->num_floored = num_floored;
    ws->ill_conditioned = ill_conditioned;
    ws->any_floor = any_floor;
    ws->reorthogonalized = false;
  }

  state->rho = rho_new;
  state->d = std::move(d_new);
  state->w = std::move(w_new);
  state->t += 1;
  if (num_floored > 0 || ill_conditioned) {
    bool fixed = Reorthogonalize(state);
    if (ws) ws->reorthogonalized = fixed;
  }
  return out;
}

template <typename Real>
PrecondOutput<Real> PreconditionOnline(const Matrix<Real> &x, bool update,
                                       OnlineNgState<Real> *state,
                                       OnlineUpdateWorkspace *ws) {
  if (update) return UpdateOnline(x, state, ws);
  return ApplyOnline(*state, x);
}

namespace {

template <typename Real>
EigenMat ComputeO(const OnlineNgState<Real> &state, const Vector<double> &e) {
  Matrix<double> wd = Matrix<double>::Cast(state.w);
  Matrix<double> wwt = kernels::MatMul(wd, Trans::kNo, wd, Trans::kYes);
  const Index r = state.rank();
  EigenMat o(r, r);
  for (Index a = 0; a < r; a++)
    for (Index b = 0; b < r; b++)
      o(a, b) = wwt(a, b) / std::sqrt(e[a] * e[b]);
  return o;
}

double MaxDeviationFromUnit(const EigenMat &o) {
  double worst = 0;
  for (Index a = 0; a < o.rows(); a++)
    for (Index b = 0; b < o.cols(); b++) {
      double dev = std::abs(o(a, b) - (a == b ? 1.0 : 0.0));
      if (!(dev <= worst)) worst = dev;  // also catches NaN
    }
  return worst;
}

}  // namespace

template <typename Real>
double OrthonormalityError(const OnlineNgState<Real> &state) {
  return MaxDeviationFromUnit(ComputeO(state, state.E()));
}

template <typename Real>
bool Reorthogonalize(OnlineNgState<Real> *state) {
  const Vector<double> e = state->E();
  EigenMat o = ComputeO(*state, e);
  if (MaxDeviationFromUnit(o) <= kOrthoThreshold) return false;

  Eigen::LLT<EigenMat> llt(o);
  if (llt.info() != Eigen::Success)
    throw Error("Reorthogonalize: R R^T is not positive definite; the "
                "preconditioner state is corrupted");
  const Index r = state->rank();
  // M = E^.5 C^-1 E^-.5 where O = C C^T.
  EigenMat c_inv = llt.matrixL().solve(EigenMat::Identity(r, r));
  Matrix<Real> m(r, r);
  for (Index a = 0; a < r; a++)
    for (Index b = 0; b < r; b++)
      m(a, b) = Real(std::sqrt(e[a]) * c_inv(a, b) / std::sqrt(e[b]));
  state->w = kernels::MatMul(m, Trans::kNo, state->w, Trans::kNo);
  return true;
}

template <typename Real>
void WriteOnlineState(std::ostream &os, const OnlineNgState<Real> &state) {
  binary::WriteU32(os, static_cast<std::uint32_t>(state.dim()));
  binary::WriteU32(os, static_cast<std::uint32_t>(state.rank()));
  binary::WriteU64(os, static_cast<std::uint64_t>(state.t));
  binary::WriteF32(os, static_cast<float>(state.rho));
  for (Real v : state.d) binary::WriteF32(os, static_cast<float>(v));
  for (Real v : state.w.values()) binary::WriteF32(os, static_cast<float>(v));
  if (!os) throw Error("WriteOnlineState: write failed");
}

template <typename Real>
OnlineNgState<Real> ReadOnlineState(std::istream &is,
                                    const OnlineNgConfig &cfg) {
  OnlineNgState<Real> state;
  state.cfg = cfg;
  const Index dim = binary::ReadU32(is, "state dim");
  const Index rank = binary::ReadU32(is, "state rank");
  if (rank < 1 || rank >= dim) throw Error("ReadOnlineState: bad rank/dim");
  state.t = static_cast<std::int64_t>(binary::ReadU64(is, "state t"));
  state.rho = Real(binary::ReadF32(is, "state rho"));
  state.d.resize(rank);
  for (Real &v : state.d) v = Real(binary::ReadF32(is, "state d"));
  state.w.Resize(rank, dim);
  for (Real &v : state.w.values()) v = Real(binary::ReadF32(is, "state w"));
  return state;
}

#define NGSGD_INSTANTIATE_ONLINE(Real)                                         \
  template struct OnlineNgState<Real>;                                        \
  template OnlineNgState<Real> InitOnlineState<Real>(const Matrix<Real> &,    \
                                                     const OnlineNgConfig &); \
  template PrecondOutput<Real> ApplyOnline<Real>(const OnlineNgState<Real> &, \
                                                 const Matrix<Real> &);       \
  template PrecondOutput<Real> UpdateOnline<Real>(                            \
      const Matrix<Real> &, OnlineNgState<Real> *, OnlineUpdateWorkspace *);  \
  template PrecondOutput<Real> PreconditionOnline<Real>(                      \
      const Matrix<Real> &, bool, OnlineNgState<Real> *,                      \
      OnlineUpdateWorkspace *);                                               \
  template double OrthonormalityError<Real>(const OnlineNgState<Real> &);     \
  template bool Reorthogonalize<Real>(OnlineNgState<Real> *);                 \
  template void WriteOnlineState<Real>(std::ostream &,                        \
                                       const OnlineNgState<Real> &);          \
  template OnlineNgState<Real> ReadOnlineState<Real>(std::istream &,          \
                                                     const OnlineNgConfig &);

NGSGD_INSTANTIATE_ONLINE(float)
NGSGD_INSTANTIATE_ONLINE(double)

}  // namespace ngsgd
