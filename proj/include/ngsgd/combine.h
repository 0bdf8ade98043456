// ngsgd/combine.h

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

#ifndef NGSGD_COMBINE_H_
#define NGSGD_COMBINE_H_

// Generalized model averaging: the final model is a per-layer weighted
// combination of the last P models, W_l = sum_p c_{p,l} W_{p,l}, with the
// P x L weights chosen to maximize the objective on held-out tuning data.

#include <span>
#include <vector>

#include "ngsgd/datakit.h"
#include "ngsgd/lbfgs.h"
#include "ngsgd/nnet.h"

namespace ngsgd {

struct CombineConfig {
  double regularizer = 1e-10;  // times |c|^2, subtracted from the objective
  LbfgsOptions lbfgs;
};

struct CombineResult {
  Network<BaseFloat> model;
  Matrix<double> weights;  // P x L
  // Tuning objectives per sample: each input model, then the uniform average.
  std::vector<double> candidate_objectives;
  int start_candidate = 0;  // index into candidate_objectives
  double start_objective = 0;
  double final_objective = 0;
  int iterations = 0;
};

/// The objective being maximized is the tuning-set log-probability per
/// sample minus regularizer * |c|^2.  The search starts from the best of the
/// P + 1 candidates (each single model, and the plain average).  With P = 1
/// the model is returned unchanged.
CombineResult CombineModels(std::span<const Network<BaseFloat>> models,
                            const Dataset &tune,
                            const CombineConfig &cfg = {});

/// Builds sum_p c_{p,l} W_{p,l} in double.
Network<double> CombineWith(std::span<const Network<double>> models,
                            const Matrix<double> &weights);

}  // namespace ngsgd

#endif  // NGSGD_COMBINE_H_
