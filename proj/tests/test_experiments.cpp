#include <doctest.h>

#include "covkit/errors.hpp"
#include "covkit/experiments.hpp"
#include "test_util.hpp"

using namespace covkit;

namespace {

ReturnsPanel rotating_panel(int n, long t, double s, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n = n;
    cfg.record_count = t;
    cfg.rotation_sd = s;
    cfg.lambda_ratio = 1.7;
    cfg.seed = seed;
    cfg.basis_stride = t;
    return panel_from_synth(generate(cfg));
}

} // namespace

TEST_CASE("run_synth_benchmark: deterministic and shaped by the s grid") {
    SynthBenchConfig cfg;
    cfg.n = 5;
    cfg.record_count = 800;
    cfg.delta_train = 30;
    cfg.delta_test = 30;
    cfg.overlap_samples = 50;
    cfg.replications = 8;
    cfg.rotation_sds = {0.0, 0.05};
    cfg.seed = 1;
    auto a = run_synth_benchmark(cfg);
    auto b = run_synth_benchmark(cfg);
    REQUIRE(a.size() == 2);
    CHECK(a[0].rotation_sd == 0.0);
    CHECK(a[1].rotation_sd == 0.05);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a[i].gaps == b[i].gaps);
        CHECK(a[i].gaps.size() == 8);
        CHECK(a[i].std_error > 0.0);
    }
}

TEST_CASE("run_synth_benchmark: replication seeds pair across factor laws") {
    SynthBenchConfig cfg;
    cfg.n = 4;
    cfg.record_count = 600;
    cfg.delta_train = 25;
    cfg.delta_test = 25;
    cfg.overlap_samples = 30;
    cfg.replications = 4;
    cfg.rotation_sds = {0.02};
    cfg.seed = 5;
    auto gauss = run_synth_benchmark(cfg);
    cfg.law = FactorLaw::student_t;
    cfg.student_dof = 5.0;
    auto student = run_synth_benchmark(cfg);
    // same replication count, same s; gaps differ (different factor draws)
    REQUIRE(gauss[0].gaps.size() == student[0].gaps.size());
    bool any_diff = false;
    for (std::size_t r = 0; r < gauss[0].gaps.size(); ++r) {
        if (gauss[0].gaps[r] != student[0].gaps[r]) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("entropy_experiment: profiles bounded, bands ordered, deterministic") {
    ReturnsPanel panel = rotating_panel(5, 1200, 0.03, 90);
    CalibrationOptions opt;
    EntropyExperimentResult res = entropy_experiment(panel, {0, 1200}, 40, 40, 60, 5, 11, opt, 200);
    CHECK(res.samples == 60);
    CHECK(res.bands_defined);
    for (int k = 0; k < 5; ++k) {
        CHECK(res.ordered_mean(k) >= 0.0);
        CHECK(res.ordered_mean(k) <= 1.0);
        CHECK(res.ordered_lo(k) <= res.ordered_mean(k) + 1e-12);
        CHECK(res.ordered_hi(k) >= res.ordered_mean(k) - 1e-12);
        CHECK(res.shuffled_lo(k) <= res.shuffled_hi(k));
    }
    EntropyExperimentResult again =
        entropy_experiment(panel, {0, 1200}, 40, 40, 60, 5, 11, opt, 200);
    CHECK(res.ordered_mean == again.ordered_mean);
    CHECK(res.shuffled_mean == again.shuffled_mean);
}

TEST_CASE("entropy_experiment: ordered entropy exceeds shuffled on rotating data") {
    // moderate rotation: the ordered prev/next bases drift apart, while local
    // shuffling mixes the two windows and inflates the apparent overlap
    ReturnsPanel panel = rotating_panel(5, 2500, 0.05, 91);
    EntropyExperimentResult res = entropy_experiment(panel, {0, 2500}, 40, 40, 150, 5, 12, {}, 200);
    CHECK(res.diff_mean.mean() > 0.0);
}

TEST_CASE("entropy_experiment: stationary data shows no ordered/shuffled separation") {
    ReturnsPanel panel = rotating_panel(5, 2500, 0.0, 95);
    EntropyExperimentResult res = entropy_experiment(panel, {0, 2500}, 40, 40, 150, 5, 16, {}, 400);
    // with no temporal evolution the paired difference band straddles zero
    // for (at least most of) the ranks
    int straddling = 0;
    for (int k = 0; k < 5; ++k) {
        if (res.diff_lo(k) <= 0.0 && res.diff_hi(k) >= 0.0) ++straddling;
    }
    CHECK(straddling >= 4);
}

TEST_CASE("eigenvalue_stability_experiment: single draw flags degenerate distributions") {
    ReturnsPanel panel = rotating_panel(4, 1000, 0.0, 96);
    EigStabilityResult res =
        eigenvalue_stability_experiment(panel, {0, 500}, {500, 1000}, 30, 30, 1, 4, 17, {}, 100);
    CHECK(res.degenerate);
    CHECK(res.l1_diff.size() == 1);
}

TEST_CASE("entropy_experiment: single sample flags undefined bands") {
    ReturnsPanel panel = rotating_panel(4, 500, 0.01, 92);
    EntropyExperimentResult res = entropy_experiment(panel, {0, 500}, 30, 30, 1, 4, 13, {}, 200);
    CHECK_FALSE(res.bands_defined);
}

TEST_CASE("eigenvalue_stability_experiment: near zero on stationary data") {
    ReturnsPanel panel = rotating_panel(4, 2400, 0.0, 93);
    EigStabilityResult res =
        eigenvalue_stability_experiment(panel, {0, 1200}, {1200, 2400}, 40, 40, 120, 4, 14, {}, 800);
    REQUIRE(res.l1_diff.size() == 120);
    REQUIRE(res.l2_diff.size() == 120);
    // both predictors are unbiased here; the mean difference is small
    double l1_spread = 0;
    for (double d : res.l1_diff) l1_spread += d * d;
    l1_spread = std::sqrt(l1_spread / 120.0);
    CHECK(std::abs(res.l1_mean) < 3.0 * l1_spread / std::sqrt(120.0) + 0.05);
    CHECK_FALSE(res.degenerate);
    CHECK(res.l1_p_value >= 0.0);
    CHECK(res.l1_p_value <= 1.0);
}

TEST_CASE("eigenvalue_stability_experiment: ranges must be ordered") {
    ReturnsPanel panel = rotating_panel(4, 800, 0.0, 94);
    CHECK_THROWS_AS(
        eigenvalue_stability_experiment(panel, {400, 800}, {0, 400}, 30, 30, 5, 4, 15, {}, 100),
        DataError);
}

TEST_CASE("panel_from_synth: dates, presence and shape") {
    SynthConfig cfg;
    cfg.n = 3;
    cfg.record_count = 10;
    ReturnsPanel p = panel_from_synth(generate(cfg), "2010-06-28");
    CHECK(p.rows() == 10);
    CHECK(p.cols() == 3);
    CHECK(p.dates.front() == "2010-06-28");
    CHECK(p.present.all());
    CHECK(p.assets.front() == "S1");
}
