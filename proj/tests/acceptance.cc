// tests/acceptance.cc

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

// Acceptance checks.  Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.  Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ngsgd-oracle/oracle.h"
#include "ngsgd-oracle/random.h"
#include "ngsgd/combine.h"
#include "ngsgd/datakit.h"
#include "ngsgd/kernels.h"
#include "ngsgd/ng-online.h"
#include "ngsgd/ng-simple.h"
#include "ngsgd/nnet.h"
#include "ngsgd/parallel.h"
#include "ngsgd/trainer.h"
#include "test-util.h"

namespace ngsgd {
namespace {

using oracle::RandomCorrelated;
using oracle::RandomGaussian;
using oracle::RandomMixing;
using test::FrobNorm;
using test::RelDiff;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char *fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Relative error of scalars, against the second argument.
double Rel(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

Outcome SimpleOracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> nd(2, 64), dd(1, 32);
  double worst = 0;
  for (int trial = 0; trial < 100; trial++) {
    auto x = RandomGaussian<double>(nd(rng), dd(rng), &rng);
    worst = std::max(worst, RelDiff(PreconditionSimple(x, {}).x_bar,
                                    oracle::PreconditionSimpleOracle(x, {}).x_bar));
  }
  return {worst <= 1e-10, Fmt("max rel err %.3g <= 1e-10 over 100 shapes", worst)};
}

Outcome BranchEquivalence() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> nd(1, 64), dd(1, 32);
  double worst_d = 0, worst_f = 0;
  for (int trial = 0; trial < 100; trial++) {
    auto xd = RandomGaussian<double>(nd(rng), dd(rng), &rng);
    const double beta = SimpleBeta(xd, {});
    worst_d = std::max(worst_d, RelDiff(SimpleQColumnSpace(xd, beta),
                                        SimpleQRowSpace(xd, beta)));
    auto xf = Matrix<float>::Cast(xd);
    worst_f = std::max(worst_f, RelDiff(SimpleQColumnSpace(xf, beta),
                                        SimpleQRowSpace(xf, beta)));
  }
  return {worst_d <= 1e-10 && worst_f <= 1e-5,
          Fmt("double %.3g <= 1e-10, single %.3g <= 1e-5", worst_d, worst_f)};
}

Outcome OnlineOracle() {
  std::mt19937_64 rng(103);
  auto mix = RandomMixing(8, &rng);
  OnlineNgConfig cfg;
  cfg.rank = 3;
  auto lib = InitOnlineState(RandomCorrelated<double>(16, 8, &rng, mix), cfg);
  auto ref = lib;
  double worst = 0;
  for (int t = 0; t < 50; t++) {
    auto x = RandomCorrelated<double>(16, 8, &rng, mix);
    const bool update = cfg.ShouldUpdate(t);
    auto a = PreconditionOnline(x, update, &lib);
    auto b = oracle::PreconditionOnlineOracle(x, update, &ref);
    worst = std::max({worst, RelDiff(a.x_bar, b.x_bar), Rel(a.gamma, b.gamma),
                      Rel(lib.rho, ref.rho)});
    for (Index i = 0; i < cfg.rank; i++) worst = std::max(worst, Rel(lib.d[i], ref.d[i]));
    worst = std::max(worst, RelDiff(kernels::MatMul(lib.w, Trans::kYes, lib.w, Trans::kNo),
                                    kernels::MatMul(ref.w, Trans::kYes, ref.w, Trans::kNo)));
  }
  return {worst <= 1e-8, Fmt("max rel err %.3g <= 1e-8 over 50 steps", worst)};
}

Outcome OrthonormalityAndTrace() {
  std::mt19937_64 rng(104);
  const Index n = 128, dim = 60;
  auto mix = RandomMixing(dim, &rng, 0.85);
  OnlineNgConfig cfg;
  cfg.rank = 20;
  auto s = InitOnlineState(RandomCorrelated<float>(n, dim, &rng, mix), cfg);
  const double eta = EtaFrom(n, cfg.s_samples);
  double worst_orth = 0, worst_trace = 0;
  int checked = 0;
  for (int t = 0; t < 1000; t++) {
    auto x = RandomCorrelated<float>(n, dim, &rng, mix);
    double tr_xx = 0;
    for (float v : x.values()) tr_xx += double(v) * v;
    const double tr_t = eta / n * tr_xx + (1 - eta) * s.TraceF();
    OnlineUpdateWorkspace ws;
    UpdateOnline(x, &s, &ws);
    worst_orth = std::max(worst_orth, OrthonormalityError(s));
    if (!ws.any_floor) {
      worst_trace = std::max(worst_trace, std::abs(s.TraceF() - tr_t) / tr_t);
      checked++;
    }
  }
  return {worst_orth <= 1e-3 && worst_trace <= 1e-3 && checked > 0,
          Fmt("orthonormality %.3g <= 1e-3; trace rel %.3g <= 1e-3 on %d "
              "unfloored steps",
              worst_orth, worst_trace, checked)};
}

Outcome NormPreservation() {
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> nd(2, 64), dd(1, 32);
  std::uniform_real_distribution<double> log_scale(-4, 4);
  double worst = 0;
  auto ratio = [](const auto &out, const auto &x) {
    return std::abs(FrobNorm(out.x_bar) / FrobNorm(x) - 1);
  };
  int cases = 0;
  for (int trial = 0; trial < 200; trial++) {
    const double scale = std::pow(10.0, log_scale(rng));
    auto xd = RandomGaussian<double>(nd(rng), dd(rng), &rng, scale);
    auto xf = Matrix<float>::Cast(xd);
    worst = std::max({worst, ratio(PreconditionSimple(xd, {}), xd),
                      ratio(PreconditionSimple(xf, {}), xf)});
    cases += 2;
  }
  for (Index dim : {Index(5), Index(40)}) {
    auto mix = RandomMixing(dim, &rng);
    OnlineNgConfig cfg;
    cfg.rank = int(std::min<Index>(10, dim - 1));
    auto sf = InitOnlineState(RandomCorrelated<float>(64, dim, &rng, mix), cfg);
    auto sd = InitOnlineState(RandomCorrelated<double>(64, dim, &rng, mix), cfg);
    for (int t = 0; t < 200; t++) {
      const Index n = 1 + t % 64;
      const double scale = std::pow(10.0, log_scale(rng));
      auto xd = RandomCorrelated<double>(n, dim, &rng, mix);
      xd.Scale(scale);
      auto xf = Matrix<float>::Cast(xd);
      const bool update = cfg.ShouldUpdate(t);
      worst = std::max({worst, ratio(PreconditionOnline(xf, update, &sf), xf),
                        ratio(PreconditionOnline(xd, update, &sd), xd)});
      cases += 2;
    }
  }
  return {worst <= 1e-5,
          Fmt("max |ratio - 1| %.3g <= 1e-5 over %d inputs", worst, cases)};
}

Outcome GradientCorrectness() {
  std::mt19937_64 rng(106);
  double worst = 0;
  int nets = 0;
  for (Nonlinearity nl : {Nonlinearity::Relu(), Nonlinearity::Pnorm(2, 2),
                          Nonlinearity::Pnorm(3, 3)}) {
    for (int hidden = 0; hidden <= 3; hidden++) {
      std::vector<Index> dims = {5};
      for (int h = 0; h < hidden; h++) dims.push_back(6);
      dims.push_back(4);
      auto net = InitNetwork<double>(dims, nl, rng());
      for (auto &l : net.layers)
        l.weights = RandomGaussian<double>(l.weights.rows(), l.weights.cols(), &rng, 0.5);
      auto x = RandomGaussian<double>(7, 5, &rng);
      std::vector<std::int32_t> y(7);
      for (auto &v : y) v = std::int32_t(rng() % 4);
      worst = std::max(worst, oracle::GradientCheck(net, x, y, 1e-5));
      nets++;
    }
  }
  return {worst <= 1e-4, Fmt("max rel err %.3g <= 1e-4 over %d nets", worst, nets)};
}

Outcome MaxChange() {
  Dataset data = GenerateSynthetic(10, 50, 20000, 3.0, 107);
  auto blocks = RandomizeBlocks(data, 1, 4, 107);
  bool pass = true;
  std::string detail;
  for (double lr : {0.01, 1.0}) {
    for (PrecondType type : {PrecondType::kNone, PrecondType::kSimple, PrecondType::kOnline}) {
      TrainerConfig cfg;
      cfg.preconditioner = type;
      cfg.lr_initial = lr;
      cfg.lr_final = lr / 10;
      const double bound =
          double(cfg.minibatch_size) * cfg.max_change_per_sample * (1 + 1e-6);
      double worst = 0;
      int clipped = 0, steps = 0;
      auto net = InitNetwork<BaseFloat>({50, 64, 64, 10}, Nonlinearity::Relu(), 107);
      TrainSerial(&net, blocks, cfg, [&](const UpdateStats &st) {
        for (const auto &l : st.layers) {
          worst = std::max(worst, l.change_norm / bound);
          if (l.alpha_scale < 1) clipped++;
        }
        steps++;
      });
      pass = pass && worst <= 1 && steps > 0;
      detail += Fmt("%s lr %g: max/bound %.4f (%d clipped); ",
                    PrecondTypeName(type).c_str(), lr, worst, clipped);
    }
  }
  return {pass, detail + "bound N*0.075*(1+1e-6)"};
}

std::size_t ModelChecksum(const Network<BaseFloat> &net) {
  std::ostringstream os;
  WriteNetwork(os, net);
  return std::hash<std::string>()(os.str());
}

Outcome OneJobReduction() {
  Dataset data = GenerateSynthetic(10, 50, 20000, 3.0, 108);
  auto blocks = RandomizeBlocks(data, 1, 4, 108);
  auto init = InitNetwork<BaseFloat>({50, 64, 10}, Nonlinearity::Relu(), 108);
  bool pass = true;
  std::string detail;
  for (PrecondType type : {PrecondType::kNone, PrecondType::kSimple, PrecondType::kOnline}) {
    TrainerConfig cfg;
    cfg.preconditioner = type;
    cfg.minibatch_size = 128;
    cfg.num_epochs = 2;
    cfg.seed = 108;
    ParallelConfig p;
    p.num_jobs = 1;
    p.num_epochs = 2;
    p.seed = 108;
    auto res = RunParallelTraining(p, cfg, blocks, init, data.Slice(0, 2000), Dataset());
    auto serial = init;
    TrainSerial(&serial, blocks, cfg);
    const auto a = ModelChecksum(res.models.back()), b = ModelChecksum(serial);
    pass = pass && a == b;
    detail += Fmt("%s %016zx %s %016zx; ", PrecondTypeName(type).c_str(), a,
                  a == b ? "==" : "!=", b);
  }
  return {pass, detail};
}

// Final training objective per sample of one desk-scale run.
double DeskRun(int seed, PrecondType type, int jobs) {
  Dataset all = GenerateSynthetic(10, 50, 200000, 3.0, seed);
  auto blocks = RandomizeBlocks(all, 4, 5, seed);
  TrainerConfig cfg;
  cfg.minibatch_size = 128;
  cfg.preconditioner = type;
  cfg.num_epochs = 5;
  cfg.seed = seed;
  ParallelConfig p;
  p.num_jobs = jobs;
  p.num_epochs = 5;
  p.seed = seed;
  auto net = InitNetwork<BaseFloat>({50, 128, 128, 10}, Nonlinearity::Relu(), seed);
  auto res = RunParallelTraining(p, cfg, blocks, net, all.Slice(0, 10000), Dataset());
  return res.log.back().train_objective;
}

Outcome DeskConvergence() {
  int online_wins = 0;
  double worst_simple = 0, worst_jobs = 0;
  std::string runs;
  for (int seed = 0; seed < 10; seed++) {
    const double none = DeskRun(seed, PrecondType::kNone, 1);
    const double online = DeskRun(seed, PrecondType::kOnline, 1);
    if (online >= none) online_wins++;
    runs += Fmt(" seed %d none %.4f online %.4f", seed, none, online);
    if (seed < 3) {
      const double simple = DeskRun(seed, PrecondType::kSimple, 1);
      const double four = DeskRun(seed, PrecondType::kOnline, 4);
      worst_simple = std::max(worst_simple, std::abs(simple - online));
      worst_jobs = std::max(worst_jobs, std::abs(four - online));
      runs += Fmt(" simple %.4f jobs4 %.4f", simple, four);
    }
    runs += ";";
  }
  const bool pass = online_wins >= 8 && worst_simple <= 0.05 && worst_jobs <= 0.05;
  return {pass, Fmt("(a) online >= none in %d/10 (need 8); (b) |simple - online| "
                    "%.4f <= 0.05; (c) |4 jobs - 1 job| %.4f <= 0.05;",
                    online_wins, worst_simple, worst_jobs) +
                    runs};
}

Outcome Compression() {
  std::mt19937_64 rng(110);
  const Index rows = 10000, cols = 100;
  Dataset d;
  d.num_classes = 2;
  d.features = RandomGaussian<BaseFloat>(rows, cols, &rng);
  for (Index j = 0; j < cols; j++) {
    const double scale = std::pow(10.0, double(j % 7) - 3), shift = double(j) - 50;
    for (Index i = 0; i < rows; i++)
      d.features(i, j) = BaseFloat(d.features(i, j) * scale + shift);
  }
  d.labels.assign(rows, 0);
  auto block = EncodeBlock(d);
  auto decoded = DecodeBlock(block);
  double worst_exact = 0, worst_float = 0;
  for (Index i = 0; i < rows; i++)
    for (Index j = 0; j < cols; j++) {
      const double bound = double(block.col_range[j]) / 510;
      const double x = d.features(i, j);
      const auto q = block.payload[i * cols + j];
      // 255 (decode - x), exact in extended precision for float inputs.
      const long double e255 = 255.0L * ((long double)block.col_min[j] - x) +
                               (long double)q * block.col_range[j];
      worst_exact = std::max(
          worst_exact, double(2 * std::abs(e255) / block.col_range[j]));
      // The float decode adds at most one rounding of the stored value.
      const double ulp = std::abs(x) * std::numeric_limits<float>::epsilon();
      worst_float = std::max(worst_float, std::abs(double(decoded.features(i, j)) - x) /
                                              (bound + ulp));
    }
  return {worst_exact <= 1 && worst_float <= 1,
          Fmt("max err / (range/510) %.12f <= 1 over 1e6 elements; float decode "
              "%.12f <= 1 with one float rounding",
              worst_exact, worst_float)};
}

Outcome InputTransform() {
  Dataset d = GenerateSynthetic(50, 20, 100000, 3.0, 111);
  std::mt19937_64 rng(111);
  auto a = RandomGaussian<double>(20, 20, &rng);
  auto offset = RandomGaussian<double>(1, 20, &rng, 5.0);
  for (Index i = 0; i < d.size(); i++) {
    std::vector<double> row(20, 0);
    for (Index j = 0; j < 20; j++) {
      for (Index k = 0; k < 20; k++) row[j] += a(j, k) * d.features(i, k);
      row[j] += offset(0, j);
    }
    for (Index j = 0; j < 20; j++) d.features(i, j) = BaseFloat(row[j]);
  }
  auto t = ComputeInputTransform(d);
  auto within = test::Covariance(ApplyLinearCentered(t.lda, t.mean, d.features),
                                 d.labels, d.num_classes);
  auto total = test::Covariance(ApplyLinearCentered(t.scaled, t.mean, d.features), {}, 1);
  double worst_within = 0, worst_total = 0;
  for (Index i = 0; i < 20; i++) {
    worst_within = std::max(worst_within, std::abs(within(i, i) - 1));
    const double target = t.lda_ratios[i] + 0.001;
    worst_total = std::max(worst_total, std::abs(total(i, i) - target) / target);
  }
  return {worst_within <= 0.05 && worst_total <= 0.05,
          Fmt("within-class diag rel dev %.4f <= 0.05; total variance rel dev "
              "%.4f <= 0.05",
              worst_within, worst_total)};
}

Outcome Combination() {
  Dataset all = GenerateSynthetic(10, 50, 24000, 3.0, 112);
  Dataset train = all.Slice(0, 20000), tune = all.Slice(20000, 4000);
  auto blocks = RandomizeBlocks(train, 2, 3, 112);
  TrainerConfig cfg;
  cfg.minibatch_size = 128;
  ParallelConfig p;
  p.num_jobs = 2;
  auto net = InitNetwork<BaseFloat>({50, 64, 64, 10}, Nonlinearity::Relu(), 112);
  auto res = RunParallelTraining(p, cfg, blocks, net, train.Slice(0, 2000), tune);
  std::vector<Network<BaseFloat>> last(res.models.end() - 3, res.models.end());
  auto c = CombineModels(last, tune);
  const double best = *std::max_element(c.candidate_objectives.begin(),
                                        c.candidate_objectives.begin() + 3);
  return {c.final_objective >= best - 1e-6,
          Fmt("combined %.6f >= best single %.6f - 1e-6", c.final_objective, best)};
}

struct Criterion {
  int id;
  const char *name;
  Outcome (*run)();
  double max_seconds;  // 0 means no limit
};

}  // namespace
}  // namespace ngsgd

int main(int argc, char **argv) {
  using namespace ngsgd;
  const std::vector<Criterion> criteria = {
      {1, "simple oracle equivalence", SimpleOracle, 10},
      {2, "row/column-space branch equivalence", BranchEquivalence, 0},
      {3, "online oracle equivalence", OnlineOracle, 5},
      {4, "orthonormality and trace", OrthonormalityAndTrace, 0},
      {5, "norm preservation", NormPreservation, 0},
      {6, "gradient correctness", GradientCorrectness, 0},
      {7, "max-change guarantee", MaxChange, 0},
      {8, "one-job reduction", OneJobReduction, 0},
      {9, "desk-scale convergence", DeskConvergence, 15 * 60},
      {10, "compression bound", Compression, 0},
      {11, "input transform", InputTransform, 0},
      {12, "model combination", Combination, 0},
  };
  std::set<int> only;
  for (int i = 1; i < argc; i++) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto &c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception &e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.max_seconds > 0 && secs > c.max_seconds) {
      out.pass = false;
      out.detail += Fmt(" runtime over %.0f s", c.max_seconds);
    }
    std::printf("%s %d %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) failures++;
  }
  return failures == 0 ? 0 : 1;
}
