// ngsgd/lbfgs.h

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

#ifndef NGSGD_LBFGS_H_
#define NGSGD_LBFGS_H_

#include <functional>
#include <span>
#include <vector>

namespace ngsgd {

struct LbfgsOptions {
  int history = 10;
  int max_iters = 100;
  double grad_tol = 1e-10;     // stop when |g|_inf falls below this
  double armijo = 1e-4;        // sufficient-decrease constant
  int max_backtracks = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Returns f(x) and writes the gradient into `grad`.
using LbfgsFunction =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Minimizes f with limited-memory BFGS (two-loop recursion) and a
/// backtracking line search.  Only steps that decrease f are accepted, so
/// the result is never worse than x0.
LbfgsResult LbfgsMinimize(const LbfgsFunction &f, std::vector<double> x0,
                          const LbfgsOptions &opts = {});

}  // namespace ngsgd

#endif  // NGSGD_LBFGS_H_
