#include <benchmark/benchmark.h>

#include <random>

#include "supcfa/classify.hpp"
#include "supcfa/dataset.hpp"
#include "supcfa/qp.hpp"
#include "supcfa/supcfa.hpp"

using namespace supcfa;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(rows * cols);
    for (double& x : v) x = normal(rng);
    return Matrix(rows, cols, std::move(v));
}

// The shipped benchmark dataset shape.
Dataset benchmark_data(std::size_t n) {
    SyntheticSpec s;
    s.n = n;
    s.d_image = 40;
    s.d_text = 30;
    s.num_classes = 4;
    s.shared_dim = 8;
    s.noise_sigma = 0.3;
    s.seed = 7;
    return generate_synthetic(s);
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_Svd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = gaussian(n, n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(svd(a));
}
BENCHMARK(BM_Svd)->RangeMultiplier(2)->Range(8, 200)->Unit(benchmark::kMillisecond);

void BM_SvdCouplingShape(benchmark::State& state) {
    const Matrix z = gaussian(40, 30, 4);
    for (auto _ : state) benchmark::DoNotOptimize(update_omegas(z, 8));
}
BENCHMARK(BM_SvdCouplingShape);

void BM_SolveQp(benchmark::State& state) {
    const Dataset d = benchmark_data(static_cast<std::size_t>(state.range(0)));
    Hyperparams hp;
    hp.shared_dim = 8;
    const OmegaPair o = fit_unsupervised_cfa(d, 8);
    const QpProblem p = build_qp_for(d, o.image, o.text, hp);
    for (auto _ : state) benchmark::DoNotOptimize(solve_qp(p));
}
BENCHMARK(BM_SolveQp)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_FitSupervised(benchmark::State& state) {
    const Dataset d = benchmark_data(400);
    Hyperparams hp;
    hp.shared_dim = 8;
    hp.outer_tol = 0.0;
    hp.max_iters = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_supervised(d, hp));
}
BENCHMARK(BM_FitSupervised)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
    const Dataset d = benchmark_data(400);
    Hyperparams hp;
    hp.shared_dim = 8;
    const ModelParams m = fit_supervised(d, hp).params;
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict(d[i].image_features, Modality::image, m));
        i = (i + 1) % d.size();
    }
}
BENCHMARK(BM_Predict);

} // namespace

BENCHMARK_MAIN();
