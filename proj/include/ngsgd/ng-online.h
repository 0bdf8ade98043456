// ngsgd/ng-online.h

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

#ifndef NGSGD_NG_ONLINE_H_
#define NGSGD_NG_ONLINE_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>

#include "ngsgd/matrix.h"
#include "ngsgd/ng-simple.h"

namespace ngsgd {

/*
  Online natural-gradient preconditioner.

  For one side (rows or columns) of one weight matrix we keep a running
  estimate of the uncentered covariance of the vectors we see,

     F_t = R_t^T D_t R_t + rho_t I,

  with R_t (R x D) having orthonormal rows and D_t diagonal.  Each minibatch X
  is multiplied by the inverse of the smoothed factor
  G_t = F_t + alpha tr(F_t)/D I and rescaled to the Frobenius norm of X.  On
  update steps F_{t+1} is fitted to T_t = eta X^T X / N + (1 - eta) F_t with a
  single power-method-like step.

  R_t is never stored.  We store W_t = E_t^{1/2} R_t, where E_t is diagonal
  with e_ii = 1 / (beta_t / d_ii + 1) and beta_t = rho_t (1 + alpha) +
  (alpha / D) tr(D_t).  With that, X G_t^{-1} beta_t = X - X W_t^T W_t, so
  applying the preconditioner is two multiplications by the R x D matrix W_t.
*/

struct OnlineNgConfig {
  int rank = 20;            // R; clipped to D - 1 at initialization
  double alpha = 4.0;       // identity smoothing
  double s_samples = 2000;  // forgetting horizon S, in samples
  int update_period = 4;    // J
  double epsilon = 1e-10;   // floor on rho and on d_ii
  int always_update_first = 10;

  void Check() const;
  /// The update-period policy: always on the first minibatches of a process,
  /// then every update_period'th minibatch.  `minibatch_index` counts every
  /// minibatch the caller has pushed through this preconditioner.
  bool ShouldUpdate(std::int64_t minibatch_index) const {
    return minibatch_index < always_update_first ||
           minibatch_index % update_period == 0;
  }
};

template <typename Real>
struct OnlineNgState {
  Real rho = 0;
  Vector<Real> d;   // diagonal of D_t, length R
  Matrix<Real> w;   // W_t, R x D
  std::int64_t t = 0;  // number of updates applied
  OnlineNgConfig cfg;

  Index dim() const { return w.cols(); }
  Index rank() const { return w.rows(); }
  /// beta_t = rho (1 + alpha) + alpha / D * tr(D_t)
  double Beta() const;
  /// Diagonal of E_t.
  Vector<double> E() const;
  /// tr(F_t) = tr(D_t) + D rho.
  double TraceF() const;
};

/// Everything the update branch computes, exposed for tests and debugging.
/// The R x R quantities are held in double.
struct OnlineUpdateWorkspace {
  double eta = 0;
  Matrix<double> h, j;          // H = X W^T (N x R), J = H^T X (R x D)
  Matrix<double> k, l;          // K = J J^T, L = W J^T or H^T H
  Matrix<double> z, u;          // Z = U C U^T
  Vector<double> c;             // after flooring, descending
  Matrix<double> a_fac, b_fac;  // W_{t+1} = A B
  double tr_x = 0, tr_x_hat = 0;
  double rho_prime = 0;
  int num_floored = 0;
  bool ill_conditioned = false;
  bool reorthogonalized = false;
  bool any_floor = false;  // true if C, rho or any d_ii was floored
};

/// eta = 1 - exp(-n / s_samples).
double EtaFrom(Index n, double s_samples);

/// Initializes the state from the first minibatch so that F_0 matches the
/// top-R eigenstructure of S_0 = X0^T X0 / N.
template <typename Real>
OnlineNgState<Real> InitOnlineState(const Matrix<Real> &x0,
                                    const OnlineNgConfig &cfg);

/// Preconditions X with the current estimate without touching the state.
template <typename Real>
PrecondOutput<Real> ApplyOnline(const OnlineNgState<Real> &state,
                                const Matrix<Real> &x);

/// Preconditions X and then updates the estimate with this minibatch.
template <typename Real>
PrecondOutput<Real> UpdateOnline(const Matrix<Real> &x,
                                 OnlineNgState<Real> *state,
                                 OnlineUpdateWorkspace *ws = nullptr);

/// Dispatches to UpdateOnline or ApplyOnline.
template <typename Real>
PrecondOutput<Real> PreconditionOnline(const Matrix<Real> &x, bool update,
                                       OnlineNgState<Real> *state,
                                       OnlineUpdateWorkspace *ws = nullptr);

/// max_ij |O - I| with O = E^{-1/2} W W^T E^{-1/2}.
template <typename Real>
double OrthonormalityError(const OnlineNgState<Real> &state);

/// If the rows of R_t are off orthonormal by more than 1e-3 in any element,
/// repairs W through the Cholesky factor of O.  Returns true if a repair was
/// made.  Throws Error if O is not positive definite.
template <typename Real>
bool Reorthogonalize(OnlineNgState<Real> *state);

/// Debug dump: u32 D, u32 R, u64 t, f32 rho, f32 d[R], f32 w[R*D], all
/// little-endian.  The configuration is not part of the record.
template <typename Real>
void WriteOnlineState(std::ostream &os, const OnlineNgState<Real> &state);
template <typename Real>
OnlineNgState<Real> ReadOnlineState(std::istream &is,
                                    const OnlineNgConfig &cfg);

/// An online preconditioner shared by several training threads.  Whoever
/// gets the update lock applies and updates; a contender that cannot get it
/// applies the current W read-only and skips the update.  Readers always see
/// a complete state.
template <typename Real>
class SharedOnlinePreconditioner {
 public:
  explicit SharedOnlinePreconditioner(OnlineNgState<Real> initial)
      : state_(std::make_shared<const OnlineNgState<Real>>(
            std::move(initial))) {}

  PrecondOutput<Real> Precondition(const Matrix<Real> &x, bool want_update,
                                   bool *updated = nullptr) {
    if (updated) *updated = false;
    if (want_update) {
      std::unique_lock<std::mutex> lock(update_mutex_, std::try_to_lock);
      if (lock.owns_lock()) {
        OnlineNgState<Real> next = *Snapshot();
        PrecondOutput<Real> out = UpdateOnline(x, &next);
        {
          std::lock_guard<std::mutex> g(snapshot_mutex_);
          state_ = std::make_shared<const OnlineNgState<Real>>(std::move(next));
        }
        if (updated) *updated = true;
        return out;
      }
    }
    return ApplyOnline(*Snapshot(), x);
  }

  std::shared_ptr<const OnlineNgState<Real>> Snapshot() const {
    std::lock_guard<std::mutex> g(snapshot_mutex_);
    return state_;
  }

  /// Exposed so tests can hold the update lock and observe the fallback.
  std::mutex &update_mutex() { return update_mutex_; }

 private:
  mutable std::mutex snapshot_mutex_;
  std::mutex update_mutex_;
  std::shared_ptr<const OnlineNgState<Real>> state_;
};

}  // namespace ngsgd

#endif  // NGSGD_NG_ONLINE_H_
