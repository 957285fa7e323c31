#include <benchmark/benchmark.h>

#include "covkit/calibration.hpp"
#include "covkit/experiments.hpp"
#include "covkit/synth.hpp"

using namespace covkit;

namespace {

const ReturnsPanel& rotating_panel() {
    static ReturnsPanel panel = [] {
        SynthConfig cfg;
        cfg.n = 10;
        cfg.record_count = 3000;
        cfg.rotation_sd = 0.02;
        cfg.seed = 11;
        cfg.basis_stride = cfg.record_count;
        return panel_from_synth(generate(cfg));
    }();
    return panel;
}

} // namespace

static void BM_SynthGenerate(benchmark::State& state) {
    SynthConfig cfg;
    cfg.n = static_cast<int>(state.range(0));
    cfg.record_count = 2000;
    cfg.rotation_sd = 0.02;
    cfg.seed = 7;
    cfg.basis_stride = cfg.record_count;
    for (auto _ : state) {
        SynthPath path = generate(cfg);
        benchmark::DoNotOptimize(path.data.data());
    }
    state.SetItemsProcessed(state.iterations() * cfg.record_count);
}
BENCHMARK(BM_SynthGenerate)->Arg(10)->Arg(30);

static void BM_PairDraw(benchmark::State& state) {
    const ReturnsPanel& panel = rotating_panel();
    std::uint64_t index = 0;
    for (auto _ : state) {
        PairDraw draw = draw_pair_sample(panel, {0, panel.rows()}, 50, 50, 10, 3, index++, {});
        benchmark::DoNotOptimize(draw.prev_std.data());
    }
}
BENCHMARK(BM_PairDraw);

static void BM_CalibrateAo(benchmark::State& state) {
    const ReturnsPanel& panel = rotating_panel();
    const auto samples = static_cast<std::uint64_t>(state.range(0));
    CalibrationOptions opt;
    opt.workers = 1;
    for (auto _ : state) {
        AOCalibration cal = calibrate_ao(panel, {0, panel.rows()}, 50, 50, samples, 10, 5, opt);
        benchmark::DoNotOptimize(cal.lambdas.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples));
}
BENCHMARK(BM_CalibrateAo)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
