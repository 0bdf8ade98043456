// ngsgd/combine.cc

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

#include "ngsgd/combine.h"

#include <algorithm>
#include <cmath>

#include "ngsgd/kernels.h"
#include "ngsgd/parallel.h"

namespace ngsgd {

Network<double> CombineWith(std::span<const Network<double>> models,
                            const Matrix<double> &weights) {
  const std::size_t p = models.size(), num_layers = models[0].layers.size();
  if (weights.rows() != Index(p) || weights.cols() != Index(num_layers))
    throw Error("CombineWith: weights must be P x L");
  Network<double> out = models[0];
  for (std::size_t l = 0; l < num_layers; l++) {
    Matrix<double> &w = out.layers[l].weights;
    w.SetZero();
    for (std::size_t m = 0; m < p; m++) {
      const double c = weights(m, l);
      const double *src = models[m].layers[l].weights.data();
      for (Index i = 0; i < w.size(); i++) w.data()[i] += c * src[i];
    }
  }
  return out;
}

namespace {

// Tuning objective per sample of the double-precision network, and its
// gradient w.r.t. every layer's weights.
double TuneObjective(const Network<double> &net, const Matrix<double> &x,
                     std::span<const std::int32_t> labels,
                     std::vector<Matrix<double>> *grads) {
  const double inv_n = 1.0 / double(x.rows());
  if (!grads) return Objective(net, x, labels) * inv_n;
  BackpropBundle<double> b = Backprop(net, Forward(net, x), labels);
  grads->resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); l++) {
    (*grads)[l] =
        kernels::MatMul(b.x_deriv[l], Trans::kYes, b.y_in[l], Trans::kNo);
    (*grads)[l].Scale(inv_n);
  }
  return b.objective * inv_n;
}

}  // namespace

CombineResult CombineModels(std::span<const Network<BaseFloat>> models,
                            const Dataset &tune, const CombineConfig &cfg) {
  if (models.empty()) throw Error("CombineModels: no models");
  if (tune.size() == 0) throw Error("CombineModels: empty tuning set");
  tune.Check();
  for (const auto &m : models) {
    if (m.layers.size() != models[0].layers.size())
      throw Error("CombineModels: architectures differ");
    for (std::size_t l = 0; l < m.layers.size(); l++)
      if (m.layers[l].weights.rows() != models[0].layers[l].weights.rows() ||
          m.layers[l].weights.cols() != models[0].layers[l].weights.cols() ||
          !(m.layers[l].nonlinearity == models[0].layers[l].nonlinearity))
        throw Error("CombineModels: architectures differ");
  }
  if (tune.dim() != models[0].input_dim)
    throw Error("CombineModels: tuning data dimension does not match model");

  const Index p = static_cast<Index>(models.size());
  const Index num_layers = static_cast<Index>(models[0].layers.size());
  CombineResult res;
  res.weights.Resize(p, num_layers, 0.0);

  std::vector<Network<double>> dmodels;
  for (const auto &m : models) dmodels.push_back(Network<double>::Cast(m));
  const Matrix<double> x = Matrix<double>::Cast(tune.features);
  const std::span<const std::int32_t> labels(tune.labels);

  // Candidates are scored on the models as they will be returned
  // (BaseFloat weights), and without the regularizer.
  auto score = [&](const Network<BaseFloat> &m) {
    return TuneObjective(Network<double>::Cast(m), x, labels, nullptr);
  };
  for (const auto &m : models) res.candidate_objectives.push_back(score(m));

  if (p == 1) {
    res.model = models[0];
    for (Index l = 0; l < num_layers; l++) res.weights(0, l) = 1;
    res.start_candidate = 0;
    res.start_objective = res.final_objective = res.candidate_objectives[0];
    return res;
  }

  res.candidate_objectives.push_back(score(AverageModels(models)));
  res.start_candidate = static_cast<int>(
      std::max_element(res.candidate_objectives.begin(),
                       res.candidate_objectives.end()) -
      res.candidate_objectives.begin());
  res.start_objective = res.candidate_objectives[res.start_candidate];

  std::vector<double> c0(p * num_layers, 0.0);
  for (Index m = 0; m < p; m++)
    for (Index l = 0; l < num_layers; l++)
      c0[m * num_layers + l] =
          res.start_candidate == p ? 1.0 / double(p)
                                   : (m == res.start_candidate ? 1.0 : 0.0);

  auto to_weights = [&](std::span<const double> c) {
    Matrix<double> w(p, num_layers);
    std::copy(c.begin(), c.end(), w.data());
    return w;
  };
  std::vector<Matrix<double>> grads;
  // L-BFGS minimizes, so we negate.
  LbfgsFunction f = [&](std::span<const double> c, std::span<double> g) {
    const Network<double> net = CombineWith(dmodels, to_weights(c));
    double obj = TuneObjective(net, x, labels, &grads);
    double reg = 0;
    for (double v : c) reg += v * v;
    for (Index m = 0; m < p; m++)
      for (Index l = 0; l < num_layers; l++) {
        const Matrix<double> &w = dmodels[m].layers[l].weights;
        double dot = 0;
        for (Index i = 0; i < w.size(); i++)
          dot += grads[l].data()[i] * w.data()[i];
        const std::size_t k = m * num_layers + l;
        g[k] = -(dot - 2.0 * cfg.regularizer * c[k]);
      }
    return -(obj - cfg.regularizer * reg);
  };
  LbfgsResult opt = LbfgsMinimize(f, c0, cfg.lbfgs);
  res.iterations = opt.iterations;

  Network<BaseFloat> combined =
      Network<BaseFloat>::Cast(CombineWith(dmodels, to_weights(opt.x)));
  const double combined_obj = score(combined);
  if (combined_obj >= res.start_objective) {
    res.model = std::move(combined);
    res.weights = to_weights(opt.x);
    res.final_objective = combined_obj;
  } else {
    // Rounding the optimum to the training precision lost more than the
    // search gained; keep the starting point.
    res.model = res.start_candidate == p
                    ? AverageModels(models)
                    : models[res.start_candidate];
    res.weights = to_weights(c0);
    res.final_objective = res.start_objective;
  }
  return res;
}

}  // namespace ngsgd
