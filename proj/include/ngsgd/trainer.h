// ngsgd/trainer.h

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

#ifndef NGSGD_TRAINER_H_
#define NGSGD_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngsgd/datakit.h"
#include "ngsgd/ng-online.h"
#include "ngsgd/ng-simple.h"
#include "ngsgd/nnet.h"

namespace ngsgd {

enum class PrecondType { kNone, kSimple, kOnline };

/// "none", "simple", "online".
PrecondType ParsePrecondType(const std::string &name);
std::string PrecondTypeName(PrecondType type);

struct TrainerConfig {
  double lr_initial = 0.01;
  double lr_final = 0.001;
  int num_epochs = 1;
  Index minibatch_size = 512;
  // Per-layer cap on the norm of one minibatch's change is this times the
  // minibatch size.  Infinity disables the guard.
  double max_change_per_sample = 0.075;
  PrecondType preconditioner = PrecondType::kOnline;
  OnlineNgConfig ng_cfg_input = DefaultOnlineConfig(20);
  OnlineNgConfig ng_cfg_output = DefaultOnlineConfig(80);
  SimpleNgConfig simple_cfg;
  std::uint64_t seed = 0;

  void Check() const;

  static OnlineNgConfig DefaultOnlineConfig(int rank) {
    OnlineNgConfig c;
    c.rank = rank;
    return c;
  }
};

struct ScheduleState {
  std::int64_t samples_seen = 0;
  std::int64_t total_samples = 1;
};

/// lr_initial * (lr_final / lr_initial)^(samples_seen / total_samples).
double LrAt(const ScheduleState &sched, double lr_initial, double lr_final);

/// alpha = min(1, max_change / sum_i eta |x_i| |y_i|), and 1 if the sum is 0.
/// `bound_sum`, if given, receives the sum.
double MaxChangeScale(double eta,
                      std::span<const std::pair<double, double>> row_norms,
                      double max_change, double *bound_sum = nullptr);

struct LayerUpdateStats {
  double alpha_scale = 1;  // alpha_t
  double bound_sum = 0;    // sum_i eta |x_bar_i| |y_bar_i|
  double gamma_in = 1, gamma_out = 1;
  double change_norm = 0;  // Frobenius norm of the change actually applied
};

struct UpdateStats {
  std::vector<LayerUpdateStats> layers;
  double objective = 0;  // sum of log-probabilities, before the update
  Index num_samples = 0;
};

/// Preconditioner state for one side of one weight matrix.  The online
/// estimate is created from the first minibatch it sees; `minibatches`
/// counts every minibatch pushed through and drives the update-period
/// policy.
template <typename Real>
struct SideState {
  std::optional<OnlineNgState<Real>> online;
  std::int64_t minibatches = 0;
};

template <typename Real>
struct LayerPrecondState {
  SideState<Real> input;   // acts on y_in (rows are layer inputs + 1)
  SideState<Real> output;  // acts on x_deriv
};

template <typename Real>
using PrecondStates = std::vector<LayerPrecondState<Real>>;

/// Preconditions one side.  Passes the input through unchanged when the
/// method cannot apply: always for kNone, N < 2 for kSimple, D < 2 for
/// kOnline.
template <typename Real>
PrecondOutput<Real> PreconditionSide(const Matrix<Real> &x, PrecondType type,
                                     const OnlineNgConfig &online_cfg,
                                     const SimpleNgConfig &simple_cfg,
                                     SideState<Real> *side);

/// One SGD step on (x, labels): forward, backprop, per-layer
/// preconditioning of both sides, max-change scaling, and
/// W_i += alpha_i * eta * X_bar^T Y_bar.  The gradient is summed over the
/// minibatch, not averaged.
template <typename Real>
UpdateStats SgdStep(Network<Real> *net, const Matrix<Real> &x,
                    std::span<const std::int32_t> labels, double eta,
                    PrecondStates<Real> *states, const TrainerConfig &cfg);

struct ObjectiveLogRow {
  std::int64_t minibatch_index = 0;
  std::int64_t samples_seen = 0;
  double eta = 0;
  double objective_per_sample = 0;
};

/// Header plus one line per row:
/// minibatch_index,samples_seen,eta,objective_per_sample
void WriteObjectiveCsv(std::ostream &os, std::span<const ObjectiveLogRow> log);

/// Options for one call of TrainOneWorker.
struct WorkerOptions {
  // The schedule position of this call's first sample, and the total.
  ScheduleState schedule;
  // The schedule advances by this many samples per sample processed; the
  // parallel driver uses the number of jobs.
  std::int64_t schedule_stride = 1;
  // Multiplies the scheduled rate (worker rate = jobs * effective rate).
  double lr_multiplier = 1.0;
  // Numbering for the log.
  std::int64_t first_minibatch_index = 0;
  // Called after every minibatch, e.g. to check the max-change guarantee.
  std::function<void(const UpdateStats &)> on_step;
};

/// Trains on the first `samples_to_process` rows of (x, labels) in order,
/// in minibatches of cfg.minibatch_size (the last one may be short).
/// Preconditioner states start fresh on every call.  Returns the
/// per-minibatch objective log.
template <typename Real>
std::vector<ObjectiveLogRow> TrainOneWorker(
    Network<Real> *net, const Matrix<Real> &x,
    std::span<const std::int32_t> labels, const TrainerConfig &cfg,
    Index samples_to_process, const WorkerOptions &opts = {});

/// Single-worker training: cfg.num_epochs passes over `blocks` in order,
/// one TrainOneWorker call per block.  The schedule runs over all samples
/// of all epochs.
std::vector<ObjectiveLogRow> TrainSerial(
    Network<BaseFloat> *net, const std::vector<Dataset> &blocks,
    const TrainerConfig &cfg,
    const std::function<void(const UpdateStats &)> &on_step = {});

}  // namespace ngsgd

#endif  // NGSGD_TRAINER_H_
