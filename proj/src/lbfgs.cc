// ngsgd/lbfgs.cc

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

#include "ngsgd/lbfgs.h"

#include <algorithm>
#include <cmath>
#include <deque>

#include "ngsgd/common.h"

namespace ngsgd {

namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); i++) s += a[i] * b[i];
  return s;
}

double MaxAbs(std::span<const double> a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Pair {
  std::vector<double> s, y;
  double rho;
};

}  // namespace

LbfgsResult LbfgsMinimize(const LbfgsFunction &f, std::vector<double> x0,
                          const LbfgsOptions &opts) {
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  res.f = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) throw Error("LbfgsMinimize: non-finite start");

  std::deque<Pair> hist;
  std::vector<double> alpha(opts.history);
  for (res.iterations = 0; res.iterations < opts.max_iters; res.iterations++) {
    if (MaxAbs(g) <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    // Two-loop recursion: dir = -H g.
    std::copy(g.begin(), g.end(), dir.begin());
    for (std::size_t k = hist.size(); k-- > 0;) {
      alpha[k] = hist[k].rho * Dot(hist[k].s, dir);
      for (std::size_t i = 0; i < n; i++) dir[i] -= alpha[k] * hist[k].y[i];
    }
    double h0 = 1.0;
    if (!hist.empty())
      h0 = Dot(hist.back().s, hist.back().y) / Dot(hist.back().y, hist.back().y);
    else
      h0 = 1.0 / std::max(1.0, std::sqrt(Dot(g, g)));
    for (double &v : dir) v *= h0;
    for (std::size_t k = 0; k < hist.size(); k++) {
      const double beta = hist[k].rho * Dot(hist[k].y, dir);
      for (std::size_t i = 0; i < n; i++) dir[i] += hist[k].s[i] * (alpha[k] - beta);
    }
    for (double &v : dir) v = -v;
    double slope = Dot(g, dir);
    if (!(slope < 0)) {
      hist.clear();
      const double scale = 1.0 / std::max(1.0, std::sqrt(Dot(g, g)));
      for (std::size_t i = 0; i < n; i++) dir[i] = -g[i] * scale;
      slope = Dot(g, dir);
    }

    double step = 1.0, f_new = 0;
    bool accepted = false;
    for (int b = 0; b < opts.max_backtracks; b++, step *= 0.5) {
      for (std::size_t i = 0; i < n; i++) x_new[i] = res.x[i] + step * dir[i];
      f_new = f(x_new, g_new);
      res.evaluations++;
      if (std::isfinite(f_new) && f_new <= res.f + opts.armijo * step * slope &&
          f_new < res.f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;  // no further decrease is achievable
      break;
    }

    Pair p{std::vector<double>(n), std::vector<double>(n), 0};
    for (std::size_t i = 0; i < n; i++) {
      p.s[i] = x_new[i] - res.x[i];
      p.y[i] = g_new[i] - g[i];
    }
    const double sy = Dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(Dot(p.s, p.s) * Dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      hist.push_back(std::move(p));
      if (static_cast<int>(hist.size()) > opts.history) hist.pop_front();
    }
    res.x.swap(x_new);
    g.swap(g_new);
    res.f = f_new;
  }
  return res;
}

}  // namespace ngsgd
