// ngsgd-oracle/verify.cc

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

#include "ngsgd-oracle/verify.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ngsgd-oracle/oracle.h"
#include "ngsgd-oracle/random.h"
#include "ngsgd/ng-online.h"
#include "ngsgd/ng-simple.h"
#include "ngsgd/nnet.h"

namespace ngsgd::oracle {

namespace {

double RelDiff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

template <typename Real>
double VectorRelError(const Vector<Real> &a, const Vector<Real> &b) {
  double scale = 1e-300, diff = 0;
  for (std::size_t i = 0; i < a.size(); i++) {
    scale = std::max(scale, std::abs(double(b[i])));
    diff = std::max(diff, std::abs(double(a[i]) - double(b[i])));
  }
  return diff / scale;
}

SuiteResult Finish(const char *suite, std::uint64_t seed, double err,
                   double tol, std::string detail) {
  return {suite, seed, err <= tol, err, tol, std::move(detail)};
}

SuiteResult SimpleSuite(std::uint64_t seed, const VerifyOptions &opts) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 64), d_dist(1, 32);
  SimpleNgConfig cfg;
  SimpleNgConfig lib_cfg = cfg;
  lib_cfg.inject_fault = opts.inject_fault;
  double worst = 0;
  const int cases = 10;
  for (int c = 0; c < cases; c++) {
    const Index n = n_dist(rng), d = d_dist(rng);
    Matrix<double> x = RandomGaussian(n, d, &rng);
    auto lib = PreconditionSimple(x, lib_cfg);
    auto ref = PreconditionSimpleOracle(x, cfg);
    worst = std::max({worst, MaxRelError(lib.x_bar, ref.x_bar),
                      RelDiff(lib.gamma, ref.gamma)});
  }
  return Finish("simple", seed, worst, 1e-10,
                std::to_string(cases) + " random shapes vs explicit hold-out");
}

SuiteResult BranchSuite(std::uint64_t seed, const VerifyOptions &) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(2, 64), d_dist(1, 32);
  double worst_d = 0, worst_f = 0;
  for (int c = 0; c < 10; c++) {
    const Index n = n_dist(rng), d = d_dist(rng);
    Matrix<double> x = RandomGaussian(n, d, &rng);
    const double beta = SimpleBeta(x, SimpleNgConfig());
    worst_d = std::max(worst_d, MaxRelError(SimpleQColumnSpace(x, beta),
                                            SimpleQRowSpace(x, beta)));
    Matrix<float> xf = Matrix<float>::Cast(x);
    const double beta_f = SimpleBeta(xf, SimpleNgConfig());
    worst_f = std::max(
        worst_f,
        MaxRelError(Matrix<double>::Cast(SimpleQColumnSpace(xf, beta_f)),
                    Matrix<double>::Cast(SimpleQRowSpace(xf, beta_f))));
  }
  // Report against the tighter budget by normalizing each precision.
  const double err = std::max(worst_d / 1e-10, worst_f / 1e-5);
  std::ostringstream os;
  os << "double " << worst_d << " (tol 1e-10), float " << worst_f
     << " (tol 1e-5)";
  return Finish("branch", seed, err, 1.0, os.str());
}

SuiteResult OnlineSuite(std::uint64_t seed, const VerifyOptions &) {
  std::mt19937_64 rng(seed);
  const Index n = 16, dim = 8;
  OnlineNgConfig cfg;
  cfg.rank = 3;
  const Matrix<double> mixing = RandomMixing(dim, &rng);
  Matrix<double> x0 = RandomCorrelated(n, dim, &rng, mixing);
  OnlineNgState<double> lib = InitOnlineState(x0, cfg);
  OnlineNgState<double> ref = lib;
  double worst = 0;
  for (std::int64_t step = 0; step < 50; step++) {
    Matrix<double> x = step == 0 ? x0 : RandomCorrelated(n, dim, &rng, mixing);
    const bool update = cfg.ShouldUpdate(step);
    auto a = PreconditionOnline(x, update, &lib);
    auto b = PreconditionOnlineOracle(x, update, &ref);
    auto wtw = [](const OnlineNgState<double> &s) {
      Matrix<double> m(s.dim(), s.dim());
      for (Index i = 0; i < s.dim(); i++)
        for (Index j = 0; j < s.dim(); j++) {
          double v = 0;
          for (Index r = 0; r < s.rank(); r++) v += s.w(r, i) * s.w(r, j);
          m(i, j) = v;
        }
      return m;
    };
    worst = std::max({worst, MaxRelError(a.x_bar, b.x_bar),
                      RelDiff(a.gamma, b.gamma), RelDiff(lib.rho, ref.rho),
                      VectorRelError(lib.d, ref.d),
                      MaxRelError(wtw(lib), wtw(ref))});
  }
  return Finish("online", seed, worst, 1e-8,
                "50 minibatches N=16 D=8 R=3 vs explicit F_t, T_t, Y_t");
}

// Every layer randomized, softmax included, so that no gradient is
// structurally zero.
Network<double> GradCheckNet(const std::vector<Index> &dims,
                             const Nonlinearity &nl, std::mt19937_64 *rng) {
  Network<double> net = InitNetwork<double>(dims, nl, (*rng)());
  for (Layer<double> &l : net.layers)
    l.weights = RandomGaussian(l.weights.rows(), l.weights.cols(), rng,
                               1.0 / std::sqrt(double(l.weights.cols())));
  return net;
}

SuiteResult GradcheckSuite(std::uint64_t seed, const VerifyOptions &) {
  std::mt19937_64 rng(seed);
  double worst = 0;
  const Nonlinearity kinds[] = {Nonlinearity::Relu(),
                                Nonlinearity::Pnorm(2.0, 2)};
  for (const Nonlinearity &nl : kinds) {
    for (int hidden = 0; hidden <= 3; hidden++) {
      std::vector<Index> dims = {6};
      for (int h = 0; h < hidden; h++) dims.push_back(5);
      dims.push_back(4);
      Network<double> net = GradCheckNet(dims, nl, &rng);
      Matrix<double> x = RandomGaussian(5, 6, &rng);
      std::vector<std::int32_t> labels(5);
      for (auto &y : labels) y = std::int32_t(rng() % 4);
      worst = std::max(worst, GradientCheck(net, x, labels, 1e-5));
    }
  }
  return Finish("gradcheck", seed, worst, 1e-4,
                "ReLU and p-norm nets, 0..3 hidden layers, h=1e-5");
}

}  // namespace

const std::vector<std::string> &SuiteNames() {
  static const std::vector<std::string> names = {"simple", "branch", "online",
                                                 "gradcheck"};
  return names;
}

SuiteResult RunSuite(const std::string &suite, std::uint64_t seed,
                     const VerifyOptions &opts) {
  if (suite == "simple") return SimpleSuite(seed, opts);
  if (suite == "branch") return BranchSuite(seed, opts);
  if (suite == "online") return OnlineSuite(seed, opts);
  if (suite == "gradcheck") return GradcheckSuite(seed, opts);
  throw Error("unknown verify suite '" + suite + "'");
}

}  // namespace ngsgd::oracle
