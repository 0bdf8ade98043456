// ngsgd/parallel.cc

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

#include "ngsgd/parallel.h"

#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>

namespace ngsgd {

void ParallelConfig::Check() const {
  if (num_jobs < 1) throw Error("ParallelConfig: num_jobs must be >= 1");
  if (samples_per_iter < 0)
    throw Error("ParallelConfig: samples_per_iter must be >= 0");
  if (num_epochs < 1) throw Error("ParallelConfig: num_epochs must be >= 1");
  if (combine_last < 1)
    throw Error("ParallelConfig: combine_last must be >= 1");
  if (grow_every < 1) throw Error("ParallelConfig: grow_every must be >= 1");
}

double DefaultSimSeconds(PrecondType type) {
  switch (type) {
    case PrecondType::kNone: return 88.0;
    case PrecondType::kOnline: return 93.0;
    case PrecondType::kSimple: return 208.0;
  }
  return 0;
}

namespace {

bool SameArchitecture(const Network<BaseFloat> &a, const Network<BaseFloat> &b) {
  if (a.input_dim != b.input_dim || a.num_classes != b.num_classes ||
      a.layers.size() != b.layers.size())
    return false;
  for (std::size_t l = 0; l < a.layers.size(); l++)
    if (a.layers[l].weights.rows() != b.layers[l].weights.rows() ||
        a.layers[l].weights.cols() != b.layers[l].weights.cols() ||
        !(a.layers[l].nonlinearity == b.layers[l].nonlinearity))
      return false;
  return true;
}

}  // namespace

Network<BaseFloat> AverageModels(std::span<const Network<BaseFloat>> models) {
  if (models.empty()) throw Error("AverageModels: no models");
  for (const auto &m : models)
    if (!SameArchitecture(m, models[0]))
      throw Error("AverageModels: architectures differ");
  Network<BaseFloat> out = models[0];
  const double inv = 1.0 / double(models.size());
  for (std::size_t l = 0; l < out.layers.size(); l++) {
    BaseFloat *dst = out.layers[l].weights.data();
    const Index size = out.layers[l].weights.size();
    for (Index i = 0; i < size; i++) {
      double sum = 0;
      for (const auto &m : models) sum += double(m.layers[l].weights.data()[i]);
      dst[i] = BaseFloat(sum * inv);
    }
  }
  return out;
}

double ObjectivePerSample(const Network<BaseFloat> &net, const Dataset &data) {
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const Index chunk = 4096;
  double total = 0;
  for (Index start = 0; start < data.size(); start += chunk) {
    const Index n = std::min(chunk, data.size() - start);
    Matrix<BaseFloat> x(n, data.dim());
    std::copy(data.features.data() + start * data.dim(),
              data.features.data() + (start + n) * data.dim(), x.data());
    total += Objective(net, x,
                       std::span<const std::int32_t>(data.labels).subspan(start, n));
  }
  return total / double(data.size());
}

std::size_t SelectBestModelIndex(std::span<const Network<BaseFloat>> models,
                                 std::span<const Dataset> shards) {
  if (models.empty()) throw Error("SelectBestModel: no models");
  if (shards.size() != models.size())
    throw Error("SelectBestModel: need one shard per model");
  std::size_t best = 0;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < models.size(); i++) {
    const double obj = ObjectivePerSample(models[i], shards[i]);
    if (obj > best_obj) {
      best_obj = obj;
      best = i;
    }
  }
  return best;
}

Network<BaseFloat> SelectBestModel(std::span<const Network<BaseFloat>> models,
                                   std::span<const Dataset> shards) {
  return models[SelectBestModelIndex(models, shards)];
}

void WriteRunLogCsv(std::ostream &os, std::span<const RunLogRow> log) {
  os << "outer_iter,epoch,samples_total,sim_time_s,avg_model_train_objective,"
        "avg_model_valid_objective\n";
  os << std::setprecision(9);
  for (const RunLogRow &r : log)
    os << r.outer_iter << ',' << r.epoch << ',' << r.samples_total << ','
       << r.sim_time_s << ',' << r.train_objective << ',' << r.valid_objective
       << '\n';
}

ParallelResult RunParallelTraining(
    const ParallelConfig &pcfg, const TrainerConfig &tcfg,
    const std::vector<Dataset> &blocks, Network<BaseFloat> initial,
    const Dataset &train_eval, const Dataset &valid,
    const std::function<void(int, const Network<BaseFloat> &)> &on_iter,
    const std::function<void(const UpdateStats &)> &on_step) {
  pcfg.Check();
  tcfg.Check();
  initial.Check();
  const int jobs = pcfg.num_jobs;
  if (static_cast<int>(blocks.size()) < jobs)
    throw Error("RunParallelTraining: " + std::to_string(blocks.size()) +
                " blocks for " + std::to_string(jobs) + " workers");

  ParallelResult res;
  res.iters_per_epoch = static_cast<int>(blocks.size()) / jobs;
  res.unused_blocks = static_cast<int>(blocks.size()) % jobs;
  auto samples_in = [&](const Dataset &b) {
    if (pcfg.samples_per_iter == 0) return b.size();
    if (pcfg.samples_per_iter > b.size())
      throw Error("RunParallelTraining: samples_per_iter exceeds block size");
    return pcfg.samples_per_iter;
  };
  std::int64_t per_epoch = 0;
  for (int b = 0; b < res.iters_per_epoch * jobs; b++)
    per_epoch += samples_in(blocks[b]);
  const std::int64_t total = per_epoch * pcfg.num_epochs;
  const double sim_per_iter = pcfg.sim_seconds_per_iter >= 0
                                  ? pcfg.sim_seconds_per_iter
                                  : DefaultSimSeconds(tcfg.preconditioner);
  res.worker_lr_initial = tcfg.lr_initial * jobs;
  res.worker_lr_final = tcfg.lr_final * jobs;

  Network<BaseFloat> current = std::move(initial);
  std::int64_t samples_total = 0;
  auto record = [&](int iter) {
    RunLogRow row;
    row.outer_iter = iter;
    row.samples_total = samples_total;
    row.epoch = double(samples_total) / double(per_epoch);
    row.sim_time_s = iter * sim_per_iter;
    row.train_objective = ObjectivePerSample(current, train_eval);
    row.valid_objective = ObjectivePerSample(current, valid);
    res.log.push_back(row);
    res.models.push_back(current);
    if (on_iter) on_iter(iter, current);
  };
  record(0);

  const int num_iters = res.iters_per_epoch * pcfg.num_epochs;
  std::size_t grown = 0;
  for (int iter = 0; iter < num_iters; iter++) {
    bool init_event = iter == 0;
    if (grown < pcfg.grow_dims.size() &&
        iter == pcfg.grow_every * static_cast<int>(grown + 1)) {
      current = AddHiddenLayer(current, pcfg.grow_dims[grown],
                               pcfg.seed + 1000003ULL * (grown + 1));
      grown++;
      init_event = true;
    }
    const int m = iter % res.iters_per_epoch;
    std::vector<Network<BaseFloat>> worker_models(jobs, current);
    std::vector<Dataset> shards(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::int64_t iter_samples = 0;
    std::vector<Index> counts(jobs);
    for (int n = 0; n < jobs; n++) {
      counts[n] = samples_in(blocks[m * jobs + n]);
      iter_samples += counts[n];
    }

#pragma omp parallel for schedule(static, 1) if (pcfg.concurrent_workers)
    for (int n = 0; n < jobs; n++) {
      try {
        const Dataset &block = blocks[m * jobs + n];
        WorkerOptions opts;
        opts.schedule = {samples_total, total};
        opts.schedule_stride = jobs;
        opts.lr_multiplier = jobs;
        opts.on_step = on_step;
        TrainOneWorker(&worker_models[n], block.features, block.labels, tcfg,
                       counts[n], opts);
        if (init_event && jobs > 1) shards[n] = block.Slice(0, counts[n]);
      } catch (...) {
        errors[n] = std::current_exception();
      }
    }
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);

    if (init_event) {
      res.selection_iters.push_back(iter + 1);
      current = jobs > 1 ? SelectBestModel(worker_models, shards)
                         : std::move(worker_models[0]);
    } else {
      current = AverageModels(worker_models);
    }
    samples_total += iter_samples;
    record(iter + 1);
  }
  return res;
}

}  // namespace ngsgd
