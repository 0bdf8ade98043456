// bench/bench_kernels.cc

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

// Parallel kernels against the serial reference, at training-sized shapes.
// Run with e.g. OMP_NUM_THREADS=4 ./bench_kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ngsgd/kernels.h"

namespace ngsgd {
namespace {

Matrix<float> Random(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Matrix<float> m(rows, cols);
  for (float &v : m.values()) v = g(rng);
  return m;
}

// Args: minibatch N, input dim, output dim.  Forward pass Y = X W^T.
template <bool kParallel>
void BM_GemmForward(benchmark::State &state) {
  const Index n = state.range(0), in = state.range(1), out = state.range(2);
  auto x = Random(n, in, 1), w = Random(out, in, 2);
  Matrix<float> y(n, out);
  for (auto _ : state) {
    if constexpr (kParallel)
      kernels::Gemm(1.0f, x, Trans::kNo, w, Trans::kYes, 0.0f, &y);
    else
      serial::Gemm(1.0f, x, Trans::kNo, w, Trans::kYes, 0.0f, &y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * n * in * out);
}

// Weight gradient G = X_deriv^T Y_in.
template <bool kParallel>
void BM_GemmGradient(benchmark::State &state) {
  const Index n = state.range(0), in = state.range(1), out = state.range(2);
  auto dx = Random(n, out, 3), y = Random(n, in, 4);
  Matrix<float> g(out, in);
  for (auto _ : state) {
    if constexpr (kParallel)
      kernels::Gemm(1.0f, dx, Trans::kYes, y, Trans::kNo, 0.0f, &g);
    else
      serial::Gemm(1.0f, dx, Trans::kYes, y, Trans::kNo, 0.0f, &g);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * n * in * out);
}

template <bool kParallel>
void BM_RowSqNorms(benchmark::State &state) {
  auto m = Random(state.range(0), state.range(1), 5);
  std::vector<float> out(m.rows());
  for (auto _ : state) {
    if constexpr (kParallel)
      kernels::RowSqNorms(m, std::span<float>(out));
    else
      serial::RowSqNorms(m, std::span<float>(out));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * m.rows() * m.cols());
}

template <bool kParallel>
void BM_Axpy(benchmark::State &state) {
  auto x = Random(state.range(0), state.range(1), 6);
  auto y = Random(state.range(0), state.range(1), 7);
  for (auto _ : state) {
    if constexpr (kParallel)
      kernels::Axpy(1e-3f, x, &y);
    else
      serial::Axpy(1e-3f, x, &y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * x.rows() * x.cols());
}

void GemmShapes(benchmark::internal::Benchmark *b) {
  b->Args({128, 51, 128})->Args({128, 129, 128})->Args({512, 513, 512});
}

BENCHMARK(BM_GemmForward<false>)->Name("Gemm/forward/serial")->Apply(GemmShapes);
BENCHMARK(BM_GemmForward<true>)->Name("Gemm/forward/parallel")->Apply(GemmShapes);
BENCHMARK(BM_GemmGradient<false>)->Name("Gemm/gradient/serial")->Apply(GemmShapes);
BENCHMARK(BM_GemmGradient<true>)->Name("Gemm/gradient/parallel")->Apply(GemmShapes);
BENCHMARK(BM_RowSqNorms<false>)->Name("RowSqNorms/serial")->Args({512, 513});
BENCHMARK(BM_RowSqNorms<true>)->Name("RowSqNorms/parallel")->Args({512, 513});
BENCHMARK(BM_Axpy<false>)->Name("Axpy/serial")->Args({512, 513});
BENCHMARK(BM_Axpy<true>)->Name("Axpy/parallel")->Args({512, 513});

}  // namespace
}  // namespace ngsgd

BENCHMARK_MAIN();
