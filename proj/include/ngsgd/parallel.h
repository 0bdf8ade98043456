// ngsgd/parallel.h

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

#ifndef NGSGD_PARALLEL_H_
#define NGSGD_PARALLEL_H_

// Data-parallel training with periodic parameter averaging.  Each of N
// workers trains its own copy of the model on its own block for one outer
// iteration, starting from the same parameters; the copies are then averaged
// and redistributed.  Workers use N times the effective learning rate.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "ngsgd/datakit.h"
#include "ngsgd/nnet.h"
#include "ngsgd/trainer.h"

namespace ngsgd {

struct ParallelConfig {
  int num_jobs = 1;
  Index samples_per_iter = 0;  // K; 0 means a whole block
  int num_epochs = 1;
  int combine_last = 20;       // P, used by the combine step
  // Negative means the default for the preconditioner (DefaultSimSeconds).
  double sim_seconds_per_iter = -1;
  std::uint64_t seed = 0;
  // Run the workers of an outer iteration on concurrent threads.  Results
  // are the same either way.
  bool concurrent_workers = false;
  // Layer-wise growth: before outer iteration grow_every * (i + 1), add a
  // hidden layer of grow_dims[i] units.
  std::vector<Index> grow_dims;
  int grow_every = 2;

  void Check() const;
};

/// Reference seconds per outer iteration: 88 for plain SGD, 93 for online
/// and 208 for simple natural gradient.
double DefaultSimSeconds(PrecondType type);

/// Elementwise mean, accumulated in double in list order.
Network<BaseFloat> AverageModels(std::span<const Network<BaseFloat>> models);

/// Index of the model with the highest objective on its own shard; ties go
/// to the lowest index.
std::size_t SelectBestModelIndex(std::span<const Network<BaseFloat>> models,
                                 std::span<const Dataset> shards);
Network<BaseFloat> SelectBestModel(std::span<const Network<BaseFloat>> models,
                                   std::span<const Dataset> shards);

struct RunLogRow {
  int outer_iter = 0;
  double epoch = 0;
  std::int64_t samples_total = 0;
  double sim_time_s = 0;
  double train_objective = 0;  // per sample, averaged model
  double valid_objective = 0;  // per sample; NaN without validation data
};

/// outer_iter,epoch,samples_total,sim_time_s,avg_model_train_objective,
/// avg_model_valid_objective
void WriteRunLogCsv(std::ostream &os, std::span<const RunLogRow> log);

struct ParallelResult {
  // models[k] is the model after k outer iterations; models[0] is the start.
  std::vector<Network<BaseFloat>> models;
  std::vector<RunLogRow> log;   // one row per entry of `models`
  double worker_lr_initial = 0, worker_lr_final = 0;
  int iters_per_epoch = 0;
  int unused_blocks = 0;  // blocks beyond a multiple of num_jobs
  std::vector<int> selection_iters;  // outer iterations that best-selected
};

/// Blocks are consumed in order: worker n at outer iteration m of an epoch
/// reads block m * num_jobs + n; every epoch reads the same sequence.
/// `train_eval` and `valid` (may be empty) are used only for the log.
/// `on_iter`, if set, is called with every model as it is produced;
/// `on_step` is forwarded to the workers and may be called concurrently when
/// concurrent_workers is set.
ParallelResult RunParallelTraining(
    const ParallelConfig &pcfg, const TrainerConfig &tcfg,
    const std::vector<Dataset> &blocks, Network<BaseFloat> initial,
    const Dataset &train_eval, const Dataset &valid,
    const std::function<void(int, const Network<BaseFloat> &)> &on_iter = {},
    const std::function<void(const UpdateStats &)> &on_step = {});

/// Sum of log-probabilities divided by the number of samples, evaluated in
/// chunks.  NaN for an empty dataset.
double ObjectivePerSample(const Network<BaseFloat> &net, const Dataset &data);

}  // namespace ngsgd

#endif  // NGSGD_PARALLEL_H_
