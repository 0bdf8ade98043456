// tests/ng-online-test.cc

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

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "ngsgd-oracle/oracle.h"
#include "ngsgd-oracle/random.h"
#include "ngsgd/kernels.h"
#include "ngsgd/ng-online.h"
#include "test-util.h"

namespace ngsgd {
namespace {

using oracle::RandomCorrelated;
using oracle::RandomGaussian;
using oracle::RandomMixing;
using test::FrobNorm;
using test::RelDiff;

OnlineNgConfig Config(int rank) {
  OnlineNgConfig c;
  c.rank = rank;
  return c;
}

Eigen::MatrixXd ToEigen(const Matrix<double> &m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); i++)
    for (Index j = 0; j < m.cols(); j++) e(i, j) = m(i, j);
  return e;
}

template <typename Real>
bool SameState(const OnlineNgState<Real> &a, const OnlineNgState<Real> &b) {
  return a.rho == b.rho && a.d == b.d && a.w == b.w && a.t == b.t;
}

// Projection onto the row space of W.
Eigen::MatrixXd RowSpaceProjector(const Matrix<double> &w) {
  Eigen::MatrixXd e = ToEigen(w);
  return e.transpose() * (e * e.transpose()).inverse() * e;
}

TEST_CASE("forgetting factor") {
  CHECK(EtaFrom(2000, 2000) == doctest::Approx(1 - std::exp(-1.0)));
  CHECK(EtaFrom(2000, 2000) == doctest::Approx(0.63212).epsilon(1e-5));
  const double tiny = EtaFrom(1, 2000);
  CHECK(tiny > 0);
  CHECK(tiny < 1);
  CHECK(tiny == doctest::Approx(4.99875e-4).epsilon(1e-5));
  CHECK(EtaFrom(512, 2000) == doctest::Approx(0.22588).epsilon(1e-4));
  CHECK_THROWS_AS(EtaFrom(0, 2000), Error);
}

TEST_CASE("update-period policy") {
  OnlineNgConfig c;
  for (int t = 0; t < 10; t++) CHECK(c.ShouldUpdate(t));
  CHECK_FALSE(c.ShouldUpdate(10));
  CHECK_FALSE(c.ShouldUpdate(11));
  CHECK(c.ShouldUpdate(12));
  CHECK_FALSE(c.ShouldUpdate(13));
  CHECK(c.ShouldUpdate(16));
}

TEST_CASE("initialization from two equal rows") {
  Matrix<double> x0({{2, 0, 0, 0}, {2, 0, 0, 0}});
  auto s = InitOnlineState(x0, Config(1));
  CHECK(s.rank() == 1);
  CHECK(s.rho == doctest::Approx(1e-10).epsilon(1e-6));
  CHECK(s.d[0] == doctest::Approx(4.0 - 1e-10).epsilon(1e-14));
  // W = e^{1/2} e_1 up to sign
  const double e = s.E()[0];
  CHECK(std::abs(s.w(0, 0)) == doctest::Approx(std::sqrt(e)));
  for (Index j = 1; j < 4; j++) CHECK(std::abs(s.w(0, j)) < 1e-12);
  CHECK(s.t == 0);
}

TEST_CASE("initialization from zeros engages the floors") {
  auto s = InitOnlineState(Matrix<double>(5, 6), Config(3));
  CHECK(s.rho == doctest::Approx(1e-10));
  for (double d : s.d) CHECK(d == doctest::Approx(1e-10));
}

TEST_CASE("initial trace matches the sample covariance") {
  std::mt19937_64 rng(21);
  auto x0 = RandomGaussian<double>(40, 12, &rng);
  auto s = InitOnlineState(x0, Config(5));
  const double tr_s = kernels::SumSq(x0) / 40;
  CHECK(s.TraceF() == doctest::Approx(tr_s).epsilon(1e-6));
}

TEST_CASE("rank is clipped to D - 1 and small D is rejected") {
  std::mt19937_64 rng(22);
  CHECK(InitOnlineState(RandomGaussian<double>(10, 5, &rng), Config(20)).rank() == 4);
  CHECK_THROWS_AS(InitOnlineState(Matrix<double>(4, 1), Config(1)), Error);
  CHECK_THROWS_AS(InitOnlineState(Matrix<double>(0, 4), Config(1)), Error);
}

TEST_CASE("zero minibatch through a zero state") {
  auto s = InitOnlineState(Matrix<double>(4, 5), Config(2));
  auto out = UpdateOnline(Matrix<double>(4, 5), &s);
  CHECK(out.gamma == 1.0);
  CHECK(test::MaxAbs(out.x_bar) == 0.0);
  CHECK(s.rho == doctest::Approx(1e-10));
  for (double d : s.d) CHECK(d == doctest::Approx(1e-10));
  CHECK(s.t == 1);
}

TEST_CASE("the apply branch leaves the state alone") {
  std::mt19937_64 rng(23);
  auto s = InitOnlineState(RandomGaussian<float>(32, 10, &rng), Config(4));
  for (int i = 0; i < 3; i++) UpdateOnline(RandomGaussian<float>(32, 10, &rng), &s);
  const auto before = s;
  auto x = RandomGaussian<float>(17, 10, &rng);
  auto out = PreconditionOnline(x, false, &s);
  CHECK(SameState(before, s));
  // Depends only on W: X - X W^T W, rescaled.
  auto h = kernels::MatMul(x, Trans::kNo, s.w, Trans::kYes);
  Matrix<float> expect = x;
  kernels::Gemm(-1.0f, h, Trans::kNo, s.w, Trans::kNo, 1.0f, &expect);
  expect.Scale(out.gamma);
  CHECK(RelDiff(out.x_bar, expect) < 1e-6);
}

TEST_CASE("fifty steps agree with the explicit D x D oracle") {
  std::mt19937_64 rng(24);
  auto mix = RandomMixing(8, &rng);
  OnlineNgConfig cfg = Config(3);
  auto x0 = RandomCorrelated<double>(16, 8, &rng, mix);
  auto lib = InitOnlineState(x0, cfg);
  auto ref = lib;
  for (int t = 0; t < 50; t++) {
    auto x = RandomCorrelated<double>(16, 8, &rng, mix);
    const bool update = cfg.ShouldUpdate(t);
    auto a = PreconditionOnline(x, update, &lib);
    auto b = oracle::PreconditionOnlineOracle(x, update, &ref);
    REQUIRE(RelDiff(a.x_bar, b.x_bar) <= 1e-8);
    CHECK(a.gamma == doctest::Approx(b.gamma).epsilon(1e-8));
    CHECK(lib.rho == doctest::Approx(ref.rho).epsilon(1e-8));
    for (Index i = 0; i < 3; i++)
      CHECK(lib.d[i] == doctest::Approx(ref.d[i]).epsilon(1e-8));
    auto wtw_a = kernels::MatMul(lib.w, Trans::kYes, lib.w, Trans::kNo);
    auto wtw_b = kernels::MatMul(ref.w, Trans::kYes, ref.w, Trans::kNo);
    CHECK(RelDiff(wtw_a, wtw_b) <= 1e-8);
  }
}

TEST_CASE("both L formulas agree") {
  std::mt19937_64 rng(25);
  for (Index n : {Index(5), Index(40)}) {
    auto s = InitOnlineState(RandomGaussian<double>(30, 12, &rng), Config(4));
    const Matrix<double> w = s.w;
    OnlineUpdateWorkspace ws;
    UpdateOnline(RandomGaussian<double>(n, 12, &rng), &s, &ws);
    auto l_wj = kernels::MatMul(w, Trans::kNo, ws.j, Trans::kYes);
    auto l_hh = kernels::MatMul(ws.h, Trans::kYes, ws.h, Trans::kNo);
    CHECK(RelDiff(l_wj, l_hh) <= 1e-10);
    CHECK(RelDiff(ws.l, l_hh) <= 1e-10);
  }
}

TEST_CASE("one step on exact low-rank-plus-identity covariance keeps the trace") {
  // Sigma = R*^T D* R* + rho* I; X = sqrt(N) Sigma^{1/2} has X^T X / N = Sigma.
  std::mt19937_64 rng(26);
  const Index dim = 6, rank = 2;
  Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(ToEigen(RandomGaussian<double>(dim, dim, &rng)))
          .householderQ();
  Eigen::VectorXd spectrum = Eigen::VectorXd::Constant(dim, 0.3);
  spectrum(0) += 5.0;
  spectrum(1) += 2.0;
  Eigen::MatrixXd sigma_half =
      q * spectrum.cwiseSqrt().asDiagonal() * q.transpose();
  Matrix<double> x(dim, dim);
  for (Index i = 0; i < dim; i++)
    for (Index j = 0; j < dim; j++) x(i, j) = std::sqrt(double(dim)) * sigma_half(i, j);

  auto init = InitOnlineState(RandomGaussian<double>(20, dim, &rng), Config(rank));
  auto lib = init;
  OnlineUpdateWorkspace ws;
  UpdateOnline(x, &lib, &ws);
  REQUIRE_FALSE(ws.any_floor);
  auto ref = init;
  double tr_t = 0;
  oracle::PreconditionOnlineOracle(x, true, &ref, &tr_t);
  CHECK(lib.TraceF() == doctest::Approx(tr_t).epsilon(1e-12));
  CHECK(ref.TraceF() == doctest::Approx(tr_t).epsilon(1e-12));
}

TEST_CASE("with eta near 1 the top eigenvalues converge to the target") {
  std::mt19937_64 rng(27);
  const Index dim = 6, rank = 2;
  Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(ToEigen(RandomGaussian<double>(dim, dim, &rng)))
          .householderQ();
  Eigen::VectorXd spectrum(dim);
  spectrum << 6.0, 3.0, 1.2, 1.0, 0.8, 0.5;
  Eigen::MatrixXd sigma_half =
      q * spectrum.cwiseSqrt().asDiagonal() * q.transpose();
  Matrix<double> x(dim, dim);
  for (Index i = 0; i < dim; i++)
    for (Index j = 0; j < dim; j++) x(i, j) = std::sqrt(double(dim)) * sigma_half(i, j);

  OnlineNgConfig cfg = Config(rank);
  cfg.s_samples = 1e-3;  // eta = 1 - exp(-6000)
  auto s = InitOnlineState(RandomGaussian<double>(3, dim, &rng), cfg);
  auto error = [&] {
    return std::abs(s.d[0] + s.rho - 6.0) + std::abs(s.d[1] + s.rho - 3.0);
  };
  // The sequence is F_1, F_2, ...; F_0 comes from unrelated data.
  UpdateOnline(x, &s);
  double prev = error();
  const double first = prev;
  for (int step = 1; step < 100; step++) {
    UpdateOnline(x, &s);
    const double e = error();
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
  CHECK(prev < 1e-3 * first);
}

TEST_CASE("orthonormality and norm preservation over many updates") {
  std::mt19937_64 rng(28);
  auto mix = RandomMixing(30, &rng, 0.8);
  auto s = InitOnlineState(RandomCorrelated<float>(64, 30, &rng, mix), Config(10));
  for (int t = 0; t < 200; t++) {
    auto x = RandomCorrelated<float>(64, 30, &rng, mix);
    auto out = UpdateOnline(x, &s);
    CHECK(OrthonormalityError(s) <= 1e-3);
    CHECK(std::abs(FrobNorm(out.x_bar) / FrobNorm(x) - 1) <= 1e-5);
    CHECK(s.rho >= 1e-10f);
    for (float d : s.d) CHECK(d >= 1e-10f);
    for (double e : s.E()) {
      CHECK(e > 0);
      CHECK(e < 1);
    }
    for (Index i = 0; i < x.rows(); i++) {
      double p = 0;
      for (float v : out.x_bar.row(i)) p += double(v) * v;
      CHECK(std::abs(out.row_sq_norms[i] - p) <= 1e-5 * std::max(p, 1e-20));
    }
  }
}

TEST_CASE("reorthogonalization") {
  std::mt19937_64 rng(29);
  auto s = InitOnlineState(RandomGaussian<double>(50, 9, &rng), Config(4));
  SUBCASE("orthonormal rows are left alone") {
    const auto before = s;
    CHECK_FALSE(Reorthogonalize(&s));
    CHECK(SameState(before, s));
  }
  SUBCASE("perturbed rows are repaired within the same row space") {
    auto noise = RandomGaussian<double>(4, 9, &rng, 1e-2);
    kernels::Axpy(1.0, noise, &s.w);
    const auto before = s.w;
    REQUIRE(OrthonormalityError(s) > 1e-3);
    CHECK(Reorthogonalize(&s));
    CHECK(OrthonormalityError(s) <= 1e-6);
    CHECK((RowSpaceProjector(before) - RowSpaceProjector(s.w)).cwiseAbs().maxCoeff() <=
          1e-6);
  }
  SUBCASE("rank-deficient W is reported") {
    for (Index j = 0; j < 9; j++) s.w(1, j) = s.w(0, j);
    CHECK_THROWS_AS(Reorthogonalize(&s), Error);
  }
}

TEST_CASE("input validation") {
  std::mt19937_64 rng(30);
  auto s = InitOnlineState(RandomGaussian<double>(10, 5, &rng), Config(2));
  CHECK_THROWS_AS(UpdateOnline(Matrix<double>(3, 4), &s), Error);
  CHECK_THROWS_AS(ApplyOnline(s, Matrix<double>(3, 6)), Error);
  Matrix<double> bad(3, 5);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(UpdateOnline(bad, &s), Error);
  OnlineNgConfig c;
  c.update_period = 0;
  CHECK_THROWS_AS(c.Check(), Error);
}

TEST_CASE("state dump round trip") {
  std::mt19937_64 rng(31);
  auto s = InitOnlineState(RandomGaussian<float>(20, 7, &rng), Config(3));
  UpdateOnline(RandomGaussian<float>(20, 7, &rng), &s);
  std::stringstream buf;
  WriteOnlineState(buf, s);
  CHECK(buf.str().size() == 4 + 4 + 8 + 4 + 3 * 4 + 21 * 4);
  auto back = ReadOnlineState<float>(buf, s.cfg);
  CHECK(SameState(s, back));
  std::stringstream truncated(buf.str().substr(0, 20));
  CHECK_THROWS_AS(ReadOnlineState<float>(truncated, s.cfg), Error);
}

TEST_CASE("shared preconditioner falls back to read-only when the lock is held") {
  std::mt19937_64 rng(32);
  auto init = InitOnlineState(RandomGaussian<float>(20, 6, &rng), Config(2));
  SharedOnlinePreconditioner<float> shared(init);
  auto x = RandomGaussian<float>(8, 6, &rng);
  bool updated = true;
  {
    std::lock_guard<std::mutex> hold(shared.update_mutex());
    auto out = shared.Precondition(x, true, &updated);
    CHECK_FALSE(updated);
    CHECK(SameState(*shared.Snapshot(), init));
    CHECK(out.x_bar == ApplyOnline(init, x).x_bar);
  }
  auto out = shared.Precondition(x, true, &updated);
  CHECK(updated);
  CHECK(shared.Snapshot()->t == 1);
  auto local = init;
  CHECK(out.x_bar == UpdateOnline(x, &local).x_bar);
  CHECK(SameState(*shared.Snapshot(), local));
}

TEST_CASE("shared preconditioner under contention") {
  std::mt19937_64 rng(33);
  SharedOnlinePreconditioner<float> shared(
      InitOnlineState(RandomGaussian<float>(20, 12, &rng), Config(3)));
  std::vector<Matrix<float>> inputs;
  for (int i = 0; i < 4; i++) inputs.push_back(RandomGaussian<float>(16, 12, &rng));
  std::atomic<int> updates{0};
  std::vector<std::thread> threads;
  for (int th = 0; th < 4; th++)
    threads.emplace_back([&, th] {
      for (int i = 0; i < 50; i++) {
        bool u = false;
        auto out = shared.Precondition(inputs[th], true, &u);
        if (u) updates++;
        if (!out.x_bar.AllFinite()) updates += 100000;
      }
    });
  for (auto &t : threads) t.join();
  auto final = shared.Snapshot();
  CHECK(final->t == updates.load());
  CHECK(updates.load() >= 1);
  CHECK(OrthonormalityError(*final) <= 1e-3);
}

}  // namespace
}  // namespace ngsgd
