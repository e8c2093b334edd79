// OpenMP kernels against their serial references. On a single core the
// parallel paths should cost about the same as the references; with more
// cores the gap is the speedup.
#include <benchmark/benchmark.h>

#include <random>

#include "graphsync/matcore.hpp"
#include "graphsync/random.hpp"

namespace {

using graphsync::DenseMatrix;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    graphsync::Rng rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    DenseMatrix m(rows, cols);
    for (double& v : m.values()) v = u(rng);
    return m;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(graphsync::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_MatmulReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(graphsync::reference::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

// Fixed sweep count so both variants do the same work.
graphsync::SinkhornParams fixed_sweeps() {
    graphsync::SinkhornParams p;
    p.tau = 0.05;
    p.max_iters = 20;
    p.tol = 1e-300;
    p.newton = false;
    return p;
}

void BM_Sinkhorn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix x = random_matrix(n, n, 3, 10.0);
    const auto p = fixed_sweeps();
    for (auto _ : state) benchmark::DoNotOptimize(graphsync::sinkhorn_solve(x, p));
}

void BM_SinkhornReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix x = random_matrix(n, n, 3, 10.0);
    const auto p = fixed_sweeps();
    for (auto _ : state) benchmark::DoNotOptimize(graphsync::reference::sinkhorn_solve(x, p));
}

}  // namespace

BENCHMARK(BM_Matmul)->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_MatmulReference)->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_Sinkhorn)->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_SinkhornReference)->RangeMultiplier(4)->Range(16, 256);

BENCHMARK_MAIN();
