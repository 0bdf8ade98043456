// tests/trainer-test.cc

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

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ngsgd-oracle/random.h"
#include "ngsgd/kernels.h"
#include "ngsgd/trainer.h"
#include "test-util.h"

namespace ngsgd {
namespace {

using oracle::RandomGaussian;
using test::RelDiff;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Toy {
  Matrix<double> x;
  std::vector<std::int32_t> y;
};

// Two Gaussian blobs far apart: linearly separable in practice.
Toy SeparableToy(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Toy t{Matrix<double>(n, 4), {}};
  for (Index i = 0; i < n; i++) {
    const int c = int(i % 2);
    t.y.push_back(c);
    for (Index j = 0; j < 4; j++) t.x(i, j) = g(rng) + (c ? 3.0 : -3.0);
  }
  return t;
}

Network<double> SmallNet(std::uint64_t seed) {
  auto net = InitNetwork<double>({4, 6, 3}, Nonlinearity::Relu(), seed);
  std::mt19937_64 rng(seed + 1);
  net.layers[1].weights = RandomGaussian<double>(3, 7, &rng, 0.3);
  return net;
}

std::vector<std::int32_t> Labels(Index n, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, classes - 1);
  std::vector<std::int32_t> y(n);
  for (auto &v : y) v = u(rng);
  return y;
}

TEST_CASE("learning-rate schedule") {
  CHECK(LrAt({0, 1000}, 0.01, 0.001) == doctest::Approx(0.01));
  CHECK(LrAt({500, 1000}, 0.01, 0.001) ==
        doctest::Approx(std::sqrt(0.01 * 0.001)).epsilon(1e-12));
  CHECK(LrAt({500, 1000}, 0.01, 0.001) == doctest::Approx(3.162e-3).epsilon(1e-3));
  CHECK(LrAt({1000, 1000}, 0.01, 0.001) == doctest::Approx(0.001));
}

TEST_CASE("max-change scale") {
  const double limit = 512 * 0.075;
  CHECK(limit == doctest::Approx(38.4));
  std::vector<std::pair<double, double>> pairs = {{2.0, 5.0}};  // sum 10
  double bound = 0;
  CHECK(MaxChangeScale(1.0, pairs, limit, &bound) == 1.0);
  CHECK(bound == doctest::Approx(10));
  pairs = {{4.0, 9.6}, {2.0, 19.2}};  // sum 76.8
  CHECK(MaxChangeScale(1.0, pairs, limit, &bound) == doctest::Approx(0.5));
  CHECK(MaxChangeScale(2.0, std::vector<std::pair<double, double>>{{1, 19.2}},
                       limit) == doctest::Approx(1.0));
  CHECK(MaxChangeScale(1.0, std::vector<std::pair<double, double>>{{0, 3}}, limit) == 1.0);
  CHECK(MaxChangeScale(1.0, {}, limit) == 1.0);
}

TEST_CASE("plain SGD step is eta X^T Y") {
  auto net = SmallNet(1);
  std::mt19937_64 rng(2);
  auto x = RandomGaussian<double>(9, 4, &rng);
  auto y = Labels(9, 3, 3);
  TrainerConfig cfg;
  cfg.preconditioner = PrecondType::kNone;
  cfg.max_change_per_sample = kInf;
  auto bundle = Backprop(net, Forward(net, x), y);
  auto expect = net;
  for (std::size_t l = 0; l < 2; l++)
    kernels::Axpy(0.05, kernels::MatMul(bundle.x_deriv[l], Trans::kYes,
                                        bundle.y_in[l], Trans::kNo),
                  &expect.layers[l].weights);
  PrecondStates<double> states;
  auto stats = SgdStep(&net, x, y, 0.05, &states, cfg);
  for (std::size_t l = 0; l < 2; l++) {
    CHECK(RelDiff(net.layers[l].weights, expect.layers[l].weights) <= 1e-12);
    CHECK(stats.layers[l].alpha_scale == 1.0);
  }
  CHECK(stats.objective == doctest::Approx(bundle.objective));
  CHECK(stats.num_samples == 9);
}

TEST_CASE("simple step equals the hand-composed pipeline") {
  auto net = SmallNet(4);
  std::mt19937_64 rng(5);
  auto x = RandomGaussian<double>(12, 4, &rng, 4.0);
  auto y = Labels(12, 3, 6);
  TrainerConfig cfg;
  cfg.preconditioner = PrecondType::kSimple;
  cfg.max_change_per_sample = 0.01;  // make the guard bite
  const double eta = 0.5;
  auto bundle = Backprop(net, Forward(net, x), y);
  auto expect = net;
  bool guard_active = false;
  for (std::size_t l = 0; l < 2; l++) {
    auto out = PreconditionSimple(bundle.x_deriv[l], cfg.simple_cfg);
    auto in = PreconditionSimple(bundle.y_in[l], cfg.simple_cfg);
    std::vector<std::pair<double, double>> norms;
    for (Index i = 0; i < 12; i++) {
      double a = 0, b = 0;
      for (double v : out.x_bar.row(i)) a += v * v;
      for (double v : in.x_bar.row(i)) b += v * v;
      norms.push_back({std::sqrt(a), std::sqrt(b)});
    }
    const double alpha = MaxChangeScale(eta, norms, 0.01 * 12);
    guard_active |= alpha < 1;
    kernels::Axpy(alpha * eta,
                  kernels::MatMul(out.x_bar, Trans::kYes, in.x_bar, Trans::kNo),
                  &expect.layers[l].weights);
  }
  CHECK(guard_active);
  PrecondStates<double> states;
  SgdStep(&net, x, y, eta, &states, cfg);
  for (std::size_t l = 0; l < 2; l++)
    CHECK(RelDiff(net.layers[l].weights, expect.layers[l].weights) <= 1e-10);
}

TEST_CASE("applied change never exceeds the per-minibatch limit") {
  for (PrecondType type : {PrecondType::kNone, PrecondType::kSimple, PrecondType::kOnline}) {
    auto net = Network<float>::Cast(SmallNet(7));
    auto toy = SeparableToy(600, 8);
    auto xf = Matrix<float>::Cast(toy.x);
    TrainerConfig cfg;
    cfg.preconditioner = type;
    cfg.minibatch_size = 50;
    cfg.lr_initial = cfg.lr_final = 1.0;  // large enough to trigger the guard
    int limited = 0;
    WorkerOptions opts;
    opts.schedule.total_samples = 600;
    opts.on_step = [&](const UpdateStats &s) {
      const double limit = s.num_samples * 0.075;
      for (const auto &l : s.layers) {
        CHECK(l.change_norm <= limit * (1 + 1e-6));
        CHECK(l.alpha_scale * l.bound_sum <= limit + 1e-6);
        CHECK(l.change_norm <= l.alpha_scale * l.bound_sum * (1 + 1e-6) + 1e-12);
        if (l.alpha_scale < 1) limited++;
      }
    };
    TrainOneWorker(&net, xf, toy.y, cfg, 600, opts);
    CHECK(limited > 0);
  }
}

TEST_CASE("duplicating the minibatch doubles the raw change") {
  auto toy = SeparableToy(8, 9);
  Matrix<double> x2(16, 4);
  std::vector<std::int32_t> y2;
  for (Index r = 0; r < 16; r++) {
    for (Index c = 0; c < 4; c++) x2(r, c) = toy.x(r % 8, c);
    y2.push_back(toy.y[r % 8]);
  }
  TrainerConfig cfg;
  cfg.preconditioner = PrecondType::kNone;
  cfg.max_change_per_sample = kInf;
  auto net1 = SmallNet(10), net2 = SmallNet(10);
  PrecondStates<double> s1, s2;
  auto a = SgdStep(&net1, toy.x, toy.y, 0.1, &s1, cfg);
  auto b = SgdStep(&net2, x2, y2, 0.1, &s2, cfg);
  for (std::size_t l = 0; l < 2; l++) {
    CHECK(b.layers[l].change_norm == doctest::Approx(2 * a.layers[l].change_norm));
    CHECK(b.layers[l].bound_sum == doctest::Approx(2 * a.layers[l].bound_sum));
  }
}

TEST_CASE("an online state with W = 0 and large rho leaves the step unchanged") {
  auto toy = SeparableToy(20, 11);
  TrainerConfig cfg;
  cfg.max_change_per_sample = kInf;
  cfg.preconditioner = PrecondType::kOnline;
  auto net = SmallNet(12);
  PrecondStates<double> states(2);
  for (std::size_t l = 0; l < 2; l++) {
    auto make = [&](Index dim, const OnlineNgConfig &c) {
      OnlineNgState<double> s;
      s.cfg = c;
      const Index r = std::min<Index>(c.rank, dim - 1);
      s.rho = 1e6;
      s.d.assign(r, 1e-10);
      s.w = Matrix<double>(r, dim);
      return s;
    };
    states[l].input.online = make(net.layers[l].weights.cols(), cfg.ng_cfg_input);
    states[l].output.online = make(net.layers[l].weights.rows(), cfg.ng_cfg_output);
    states[l].input.minibatches = states[l].output.minibatches = 1;
  }
  auto plain = net;
  TrainerConfig none = cfg;
  none.preconditioner = PrecondType::kNone;
  PrecondStates<double> unused;
  SgdStep(&net, toy.x, toy.y, 0.1, &states, cfg);
  SgdStep(&plain, toy.x, toy.y, 0.1, &unused, none);
  for (std::size_t l = 0; l < 2; l++)
    CHECK(RelDiff(net.layers[l].weights, plain.layers[l].weights) <= 1e-5);
}

TEST_CASE("training one worker") {
  auto toy = SeparableToy(1000, 13);
  TrainerConfig cfg;
  cfg.minibatch_size = 64;
  WorkerOptions opts;
  opts.schedule.total_samples = 1000;

  SUBCASE("minibatch count and a short last minibatch") {
    auto net = SmallNet(14);
    auto log = TrainOneWorker(&net, toy.x, toy.y, cfg, 1000, opts);
    REQUIRE(log.size() == 16);  // ceil(1000 / 64)
    CHECK(log.back().samples_seen == 960);
    for (std::size_t i = 1; i < log.size(); i++) {
      CHECK(log[i].samples_seen > log[i - 1].samples_seen);
      CHECK(log[i].eta < log[i - 1].eta);
    }
    CHECK(log.front().eta == doctest::Approx(0.01));
    CHECK(log.back().objective_per_sample > log.front().objective_per_sample);
  }
  SUBCASE("deterministic") {
    for (PrecondType type : {PrecondType::kSimple, PrecondType::kOnline}) {
      cfg.preconditioner = type;
      auto a = SmallNet(15), b = SmallNet(15);
      TrainOneWorker(&a, toy.x, toy.y, cfg, 700, opts);
      TrainOneWorker(&b, toy.x, toy.y, cfg, 700, opts);
      CHECK(a == b);
    }
  }
  SUBCASE("zero samples is a no-op") {
    auto net = SmallNet(16);
    const auto before = net;
    CHECK(TrainOneWorker(&net, toy.x, toy.y, cfg, 0, opts).empty());
    CHECK(net == before);
  }
  SUBCASE("errors") {
    auto net = SmallNet(16);
    CHECK_THROWS_AS(TrainOneWorker(&net, toy.x, toy.y, cfg, 1001, opts), Error);
    CHECK_THROWS_AS(
        TrainOneWorker(&net, Matrix<double>(0, 4), std::span<const std::int32_t>(), cfg, 1, opts),
        Error);
    TrainerConfig bad = cfg;
    bad.lr_final = 0.1;
    CHECK_THROWS_AS(TrainOneWorker(&net, toy.x, toy.y, bad, 10, opts), Error);
  }
  SUBCASE("schedule stride and multiplier") {
    auto net = SmallNet(17);
    WorkerOptions o = opts;
    o.schedule = {100, 4000};
    o.schedule_stride = 4;
    o.lr_multiplier = 4;
    auto log = TrainOneWorker(&net, toy.x, toy.y, cfg, 128, o);
    REQUIRE(log.size() == 2);
    CHECK(log[1].samples_seen == 100 + 4 * 64);
    CHECK(log[1].eta == doctest::Approx(4 * LrAt({356, 4000}, 0.01, 0.001)));
  }
}

TEST_CASE("serial training over blocks") {
  auto data = GenerateSynthetic(3, 4, 900, 4.0, 18);
  auto blocks = RandomizeBlocks(data, 1, 3, 19);
  TrainerConfig cfg;
  cfg.minibatch_size = 100;
  cfg.num_epochs = 2;
  auto net = InitNetwork<BaseFloat>({4, 8, 3}, Nonlinearity::Relu(), 20);
  auto log = TrainSerial(&net, blocks, cfg);
  REQUIRE(log.size() == 18);
  CHECK(log.front().eta == doctest::Approx(0.01));
  CHECK(log.back().eta == doctest::Approx(0.01 * std::pow(0.1, 1700.0 / 1800)));
  for (std::size_t i = 0; i < log.size(); i++) CHECK(log[i].minibatch_index == Index(i));
  CHECK(log.back().objective_per_sample > log.front().objective_per_sample);

  std::ostringstream os;
  WriteObjectiveCsv(os, log);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "minibatch_index,samples_seen,eta,objective_per_sample");
  std::getline(is, line);
  CHECK(line.rfind("0,0,0.01,", 0) == 0);
}

TEST_CASE("preconditioner names") {
  CHECK(ParsePrecondType("none") == PrecondType::kNone);
  CHECK(ParsePrecondType("simple") == PrecondType::kSimple);
  CHECK(ParsePrecondType("online") == PrecondType::kOnline);
  CHECK(PrecondTypeName(PrecondType::kOnline) == "online");
  CHECK_THROWS_AS(ParsePrecondType("kfac"), Error);
}

TEST_CASE("sides that cannot be preconditioned pass through") {
  SideState<double> side;
  Matrix<double> one_col({{1}, {2}, {3}});
  auto out = PreconditionSide(one_col, PrecondType::kOnline, {}, {}, &side);
  CHECK(out.x_bar == one_col);
  CHECK_FALSE(side.online.has_value());
  Matrix<double> one_row({{1, 2, 3}});
  CHECK(PreconditionSide(one_row, PrecondType::kSimple, {}, {}, &side).x_bar == one_row);
}

}  // namespace
}  // namespace ngsgd
