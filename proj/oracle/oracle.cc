// ngsgd-oracle/oracle.cc

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

#include "ngsgd-oracle/oracle.h"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ngsgd::oracle {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat ToEigen(const Matrix<double> &m) {
  Mat out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); i++)
    for (Index j = 0; j < m.cols(); j++) out(i, j) = m(i, j);
  return out;
}

Matrix<double> FromEigen(const Mat &m) {
  Matrix<double> out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); i++)
    for (Index j = 0; j < m.cols(); j++) out(i, j) = m(i, j);
  return out;
}

PrecondOutput<double> Rescale(const Mat &x, const Mat &x_hat) {
  PrecondOutput<double> out;
  const double tr_x = x.squaredNorm(), tr_hat = x_hat.squaredNorm();
  out.gamma = tr_hat > 0 ? std::sqrt(tr_x / tr_hat) : 1.0;
  Mat x_bar = out.gamma * x_hat;
  out.x_bar = FromEigen(x_bar);
  out.row_sq_norms.resize(x.rows());
  for (Index i = 0; i < x.rows(); i++)
    out.row_sq_norms[i] = x_bar.row(i).squaredNorm();
  return out;
}

double SmoothingBeta(double rho, const Vec &d, double alpha, Index dim) {
  return rho * (1.0 + alpha) + alpha * d.sum() / double(dim);
}

Vec EDiag(double rho, const Vec &d, double alpha, Index dim) {
  const double beta = SmoothingBeta(rho, d, alpha, dim);
  Vec e(d.size());
  for (Index i = 0; i < d.size(); i++) e(i) = 1.0 / (beta / d(i) + 1.0);
  return e;
}

}  // namespace

PrecondOutput<double> PreconditionSimpleOracle(const Matrix<double> &xm,
                                               const SimpleNgConfig &cfg) {
  const Index n = xm.rows(), d = xm.cols();
  if (n < 2) throw Error("oracle: need N >= 2");
  if (!xm.AllFinite()) throw Error("oracle: non-finite input");
  const Mat x = ToEigen(xm);
  const double beta =
      cfg.alpha * std::max(x.squaredNorm(), cfg.epsilon) / double(n * d);
  Mat x_hat(n, d);
  for (Index i = 0; i < n; i++) {
    Mat g = beta * Mat::Identity(d, d);
    for (Index j = 0; j < n; j++)
      if (j != i)
        g += x.row(j).transpose() * x.row(j) / double(n - 1);
    x_hat.row(i) = (g.inverse() * x.row(i).transpose()).transpose();
  }
  return Rescale(x, x_hat);
}

PrecondOutput<double> PreconditionOnlineOracle(const Matrix<double> &xm,
                                               bool update,
                                               OnlineNgState<double> *state,
                                               double *tr_t) {
  const OnlineNgConfig &cfg = state->cfg;
  const Index n = xm.rows(), dim = xm.cols(), rank = state->rank();
  if (dim != state->dim()) throw Error("oracle: dimension mismatch");
  const Mat x = ToEigen(xm);
  const double rho = state->rho;
  Vec d(rank);
  for (Index i = 0; i < rank; i++) d(i) = state->d[i];
  const Vec e = EDiag(rho, d, cfg.alpha, dim);
  // R_t = E^{-1/2} W_t.
  Mat r = e.cwiseSqrt().cwiseInverse().asDiagonal() * ToEigen(state->w);

  const Mat f = r.transpose() * d.asDiagonal() * r +
                rho * Mat::Identity(dim, dim);
  const Mat g = f + cfg.alpha * f.trace() / double(dim) *
                        Mat::Identity(dim, dim);
  const double beta = SmoothingBeta(rho, d, cfg.alpha, dim);
  // Rows of X times beta G^{-1}; G is symmetric.
  const Mat x_hat = beta * x * g.inverse();
  PrecondOutput<double> out = Rescale(x, x_hat);
  if (!update) return out;

  const double eta = 1.0 - std::exp(-double(n) / cfg.s_samples);
  const Mat s = x.transpose() * x / double(n);
  const Mat t = eta * s + (1.0 - eta) * f;
  if (tr_t) *tr_t = t.trace();
  const Mat y = r * t;
  const Mat z = y * y.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(z);
  Vec c(rank);
  Mat u(rank, rank);
  for (Index i = 0; i < rank; i++) {
    c(i) = eig.eigenvalues()(rank - 1 - i);
    u.col(i) = eig.eigenvectors().col(rank - 1 - i);
  }
  const double c_floor = (1.0 - eta) * (1.0 - eta) * rho * rho;
  bool floored = false;
  for (Index i = 0; i < rank; i++)
    if (c(i) < c_floor) {
      c(i) = c_floor;
      floored = true;
    }
  const bool ill_conditioned = c(0) > 1e6 * c(rank - 1);

  Mat r_new = c.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose() * y;
  const double rho_prime =
      (t.trace() - c.cwiseSqrt().sum()) / double(dim - rank);
  Vec d_new(rank);
  for (Index i = 0; i < rank; i++)
    d_new(i) = std::max(std::sqrt(c(i)) - rho_prime, cfg.epsilon);
  const double rho_new = std::max(cfg.epsilon, rho_prime);

  if (floored || ill_conditioned) {
    const Mat o = r_new * r_new.transpose();
    const double dev = (o - Mat::Identity(rank, rank)).cwiseAbs().maxCoeff();
    if (dev > 1e-3) {
      Eigen::LLT<Mat> llt(o);
      if (llt.info() != Eigen::Success)
        throw Error("oracle: R R^T not positive definite");
      r_new = llt.matrixL().solve(r_new);
    }
  }

  const Vec e_new = EDiag(rho_new, d_new, cfg.alpha, dim);
  state->rho = rho_new;
  state->d.assign(d_new.data(), d_new.data() + rank);
  state->w = FromEigen(e_new.cwiseSqrt().asDiagonal() * r_new);
  state->t += 1;
  return out;
}

Matrix<double> NumericGradient(const Network<double> &net,
                               const Matrix<double> &x,
                               std::span<const std::int32_t> labels,
                               std::size_t layer, double h) {
  Network<double> probe = net;
  Matrix<double> &w = probe.layers.at(layer).weights;
  Matrix<double> grad(w.rows(), w.cols());
  for (Index i = 0; i < w.size(); i++) {
    const double orig = w.data()[i];
    w.data()[i] = orig + h;
    const double plus = Objective(probe, x, labels);
    w.data()[i] = orig - h;
    const double minus = Objective(probe, x, labels);
    w.data()[i] = orig;
    grad.data()[i] = (plus - minus) / (2 * h);
  }
  return grad;
}

double GradientCheck(const Network<double> &net, const Matrix<double> &x,
                     std::span<const std::int32_t> labels, double h) {
  BackpropBundle<double> bundle = Backprop(net, Forward(net, x), labels);
  double worst = 0;
  for (std::size_t l = 0; l < net.layers.size(); l++) {
    const Matrix<double> numeric = NumericGradient(net, x, labels, l, h);
    const Matrix<double> &xd = bundle.x_deriv[l], &yin = bundle.y_in[l];
    for (Index r = 0; r < numeric.rows(); r++)
      for (Index c = 0; c < numeric.cols(); c++) {
        double a = 0;
        for (Index i = 0; i < xd.rows(); i++) a += xd(i, r) * yin(i, c);
        const double nv = numeric(r, c);
        const double denom = std::max({std::abs(a), std::abs(nv), 1e-8});
        worst = std::max(worst, std::abs(a - nv) / denom);
      }
  }
  return worst;
}

double MaxRelError(const Matrix<double> &a, const Matrix<double> &b,
                   double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("MaxRelError: shape mismatch");
  double scale = floor, diff = 0;
  for (Index i = 0; i < a.size(); i++) {
    scale = std::max(scale, std::abs(b.data()[i]));
    diff = std::max(diff, std::abs(a.data()[i] - b.data()[i]));
  }
  return diff / scale;
}

}  // namespace ngsgd::oracle
