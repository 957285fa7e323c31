#include <benchmark/benchmark.h>

#include <random>

#include "covkit/estimators.hpp"
#include "covkit/linalg.hpp"
#include "covkit/portfolio.hpp"
#include "covkit/rng.hpp"
#include "covkit/synth.hpp"

using namespace covkit;

namespace {

Matrix data_matrix(int rows, int cols) {
    auto eng = rng::engine(1, {rng::stream::testing});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix x(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) x(r, c) = gauss(eng);
    }
    return x;
}

} // namespace

static void BM_SampleCovariance(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix x = data_matrix(252, n);
    for (auto _ : state) {
        Matrix c = sample_covariance(x);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_SampleCovariance)->Arg(10)->Arg(50)->Arg(100);

static void BM_Eigendecompose(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix c = sample_covariance(data_matrix(4 * n, n));
    for (auto _ : state) {
        EigenSystem es = eigendecompose(c);
        benchmark::DoNotOptimize(es.eigenvalues.data());
    }
}
BENCHMARK(BM_Eigendecompose)->Arg(10)->Arg(50)->Arg(100);

static void BM_Overlap(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix vp = haar_rotation(n, 2);
    Matrix vn = haar_rotation(n, 3);
    for (auto _ : state) {
        Matrix h2 = overlap(vp, vn);
        benchmark::DoNotOptimize(h2.data());
    }
}
BENCHMARK(BM_Overlap)->Arg(10)->Arg(100);

static void BM_OracleEigenvalues(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix v = haar_rotation(n, 4);
    Matrix sigma = sample_covariance(data_matrix(4 * n, n));
    for (auto _ : state) {
        Vector lambdas = oracle_eigenvalues(v, sigma);
        benchmark::DoNotOptimize(lambdas.data());
    }
}
BENCHMARK(BM_OracleEigenvalues)->Arg(10)->Arg(100);

static void BM_NlsCvEigenvalues(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix x = data_matrix(252, n);
    for (auto _ : state) {
        Vector lambdas = nls_cv_eigenvalues(x, 10);
        benchmark::DoNotOptimize(lambdas.data());
    }
}
BENCHMARK(BM_NlsCvEigenvalues)->Arg(10)->Arg(50);

static void BM_GmvWeights(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Matrix sigma = sample_covariance(data_matrix(4 * n, n));
    for (auto _ : state) {
        PortfolioWeights w = gmv_weights(sigma);
        benchmark::DoNotOptimize(w.weights.data());
    }
}
BENCHMARK(BM_GmvWeights)->Arg(10)->Arg(100);
