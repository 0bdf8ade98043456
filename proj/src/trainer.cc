// ngsgd/trainer.cc

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

#include "ngsgd/trainer.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "ngsgd/kernels.h"

namespace ngsgd {

PrecondType ParsePrecondType(const std::string &name) {
  if (name == "none") return PrecondType::kNone;
  if (name == "simple") return PrecondType::kSimple;
  if (name == "online") return PrecondType::kOnline;
  throw Error("unknown preconditioner '" + name +
              "' (expected none, simple or online)");
}

std::string PrecondTypeName(PrecondType type) {
  switch (type) {
    case PrecondType::kNone: return "none";
    case PrecondType::kSimple: return "simple";
    case PrecondType::kOnline: return "online";
  }
  return "?";
}

void TrainerConfig::Check() const {
  if (!(lr_initial > 0) || !(lr_final > 0))
    throw Error("TrainerConfig: learning rates must be positive");
  if (lr_final > lr_initial)
    throw Error("TrainerConfig: lr_final must not exceed lr_initial");
  if (num_epochs < 1) throw Error("TrainerConfig: num_epochs must be >= 1");
  if (minibatch_size < 1)
    throw Error("TrainerConfig: minibatch_size must be >= 1");
  if (!(max_change_per_sample > 0))
    throw Error("TrainerConfig: max_change_per_sample must be > 0");
  ng_cfg_input.Check();
  ng_cfg_output.Check();
  simple_cfg.Check();
}

double LrAt(const ScheduleState &sched, double lr_initial, double lr_final) {
  if (sched.total_samples <= 0) throw Error("LrAt: total_samples must be > 0");
  const double frac =
      std::clamp(double(sched.samples_seen) / double(sched.total_samples),
                 0.0, 1.0);
  return lr_initial * std::pow(lr_final / lr_initial, frac);
}

double MaxChangeScale(double eta,
                      std::span<const std::pair<double, double>> row_norms,
                      double max_change, double *bound_sum) {
  double sum = 0;
  for (const auto &[x, y] : row_norms) sum += x * y;
  sum *= eta;
  if (bound_sum) *bound_sum = sum;
  if (!(sum > 0) || !(sum > max_change)) return 1.0;
  return max_change / sum;
}

namespace {

template <typename Real>
PrecondOutput<Real> Passthrough(const Matrix<Real> &x) {
  PrecondOutput<Real> out;
  out.x_bar = x;
  out.gamma = 1;
  out.row_sq_norms.resize(x.rows());
  kernels::RowSqNorms<Real>(x, out.row_sq_norms);
  return out;
}

}  // namespace

template <typename Real>
PrecondOutput<Real> PreconditionSide(const Matrix<Real> &x, PrecondType type,
                                     const OnlineNgConfig &online_cfg,
                                     const SimpleNgConfig &simple_cfg,
                                     SideState<Real> *side) {
  switch (type) {
    case PrecondType::kNone:
      return Passthrough(x);
    case PrecondType::kSimple:
      if (x.rows() < 2) return Passthrough(x);
      return PreconditionSimple(x, simple_cfg);
    case PrecondType::kOnline: {
      if (x.cols() < 2) return Passthrough(x);
      if (!side->online) side->online = InitOnlineState(x, online_cfg);
      const bool update = online_cfg.ShouldUpdate(side->minibatches);
      side->minibatches++;
      return PreconditionOnline(x, update, &*side->online);
    }
  }
  throw Error("PreconditionSide: bad preconditioner type");
}

template <typename Real>
UpdateStats SgdStep(Network<Real> *net, const Matrix<Real> &x,
                    std::span<const std::int32_t> labels, double eta,
                    PrecondStates<Real> *states, const TrainerConfig &cfg) {
  const std::size_t num_layers = net->layers.size();
  if (states->size() != num_layers) states->resize(num_layers);
  BackpropBundle<Real> bundle = Backprop(*net, Forward(*net, x), labels);

  UpdateStats stats;
  stats.objective = bundle.objective;
  stats.num_samples = x.rows();
  stats.layers.resize(num_layers);
  const double max_change = cfg.max_change_per_sample * double(x.rows());

  for (std::size_t l = 0; l < num_layers; l++) {
    LayerPrecondState<Real> &st = (*states)[l];
    PrecondOutput<Real> out =
        PreconditionSide(bundle.x_deriv[l], cfg.preconditioner,
                         cfg.ng_cfg_output, cfg.simple_cfg, &st.output);
    PrecondOutput<Real> in =
        PreconditionSide(bundle.y_in[l], cfg.preconditioner, cfg.ng_cfg_input,
                         cfg.simple_cfg, &st.input);

    std::vector<std::pair<double, double>> norms(x.rows());
    for (Index i = 0; i < x.rows(); i++)
      norms[i] = {std::sqrt(double(out.row_sq_norms[i])),
                  std::sqrt(double(in.row_sq_norms[i]))};
    LayerUpdateStats &ls = stats.layers[l];
    ls.alpha_scale = MaxChangeScale(eta, norms, max_change, &ls.bound_sum);
    ls.gamma_in = in.gamma;
    ls.gamma_out = out.gamma;

    Matrix<Real> delta =
        kernels::MatMul(out.x_bar, Trans::kYes, in.x_bar, Trans::kNo);
    const double step = ls.alpha_scale * eta;
    ls.change_norm = step * std::sqrt(kernels::SumSq(delta));
    kernels::Axpy(Real(step), delta, &net->layers[l].weights);
  }
  return stats;
}

void WriteObjectiveCsv(std::ostream &os, std::span<const ObjectiveLogRow> log) {
  os << "minibatch_index,samples_seen,eta,objective_per_sample\n";
  os << std::setprecision(9);
  for (const ObjectiveLogRow &r : log)
    os << r.minibatch_index << ',' << r.samples_seen << ',' << r.eta << ','
       << r.objective_per_sample << '\n';
}

template <typename Real>
std::vector<ObjectiveLogRow> TrainOneWorker(
    Network<Real> *net, const Matrix<Real> &x,
    std::span<const std::int32_t> labels, const TrainerConfig &cfg,
    Index samples_to_process, const WorkerOptions &opts) {
  cfg.Check();
  if (samples_to_process < 0)
    throw Error("TrainOneWorker: negative sample count");
  if (samples_to_process > 0 && x.rows() == 0)
    throw Error("TrainOneWorker: empty data stream");
  if (samples_to_process > x.rows())
    throw Error("TrainOneWorker: asked for " +
                std::to_string(samples_to_process) + " samples, stream has " +
                std::to_string(x.rows()));
  if (static_cast<Index>(labels.size()) != x.rows())
    throw Error("TrainOneWorker: label count does not match features");

  std::vector<ObjectiveLogRow> log;
  PrecondStates<Real> states(net->layers.size());
  const Index mb = cfg.minibatch_size, dim = x.cols();
  std::int64_t index = opts.first_minibatch_index;
  for (Index start = 0; start < samples_to_process; start += mb) {
    const Index n = std::min(mb, samples_to_process - start);
    Matrix<Real> batch(n, dim);
    std::copy(x.data() + start * dim, x.data() + (start + n) * dim,
              batch.data());
    ScheduleState sched = opts.schedule;
    sched.samples_seen = std::min(
        sched.total_samples, sched.samples_seen + opts.schedule_stride * start);
    const double eta =
        opts.lr_multiplier * LrAt(sched, cfg.lr_initial, cfg.lr_final);
    UpdateStats stats = SgdStep(net, batch, labels.subspan(start, n), eta,
                                &states, cfg);
    if (opts.on_step) opts.on_step(stats);
    log.push_back({index++, sched.samples_seen, eta,
                   stats.objective / double(n)});
  }
  return log;
}

std::vector<ObjectiveLogRow> TrainSerial(
    Network<BaseFloat> *net, const std::vector<Dataset> &blocks,
    const TrainerConfig &cfg,
    const std::function<void(const UpdateStats &)> &on_step) {
  cfg.Check();
  if (blocks.empty()) throw Error("TrainSerial: no data blocks");
  std::int64_t per_epoch = 0;
  for (const Dataset &b : blocks) per_epoch += b.size();
  WorkerOptions opts;
  opts.schedule.total_samples = per_epoch * cfg.num_epochs;
  opts.on_step = on_step;
  std::vector<ObjectiveLogRow> log;
  for (int epoch = 0; epoch < cfg.num_epochs; epoch++) {
    for (const Dataset &b : blocks) {
      std::vector<ObjectiveLogRow> part =
          TrainOneWorker(net, b.features, b.labels, cfg, b.size(), opts);
      opts.first_minibatch_index += static_cast<std::int64_t>(part.size());
      opts.schedule.samples_seen += b.size();
      log.insert(log.end(), part.begin(), part.end());
    }
  }
  return log;
}

#define NGSGD_INSTANTIATE_TRAINER(Real)                                       \
  template PrecondOutput<Real> PreconditionSide<Real>(                       \
      const Matrix<Real> &, PrecondType, const OnlineNgConfig &,             \
      const SimpleNgConfig &, SideState<Real> *);                            \
  template UpdateStats SgdStep<Real>(Network<Real> *, const Matrix<Real> &,  \
                                     std::span<const std::int32_t>, double,  \
                                     PrecondStates<Real> *,                  \
                                     const TrainerConfig &);                 \
  template std::vector<ObjectiveLogRow> TrainOneWorker<Real>(                \
      Network<Real> *, const Matrix<Real> &, std::span<const std::int32_t>,  \
      const TrainerConfig &, Index, const WorkerOptions &);

NGSGD_INSTANTIATE_TRAINER(float)
NGSGD_INSTANTIATE_TRAINER(double)

}  // namespace ngsgd
