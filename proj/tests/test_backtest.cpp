#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>

#include "covkit/backtest.hpp"
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
    cfg.basis_stride = t;  // endpoints only
    return panel_from_synth(generate(cfg));
}

AOCalibration calibrated(const ReturnsPanel& panel, std::ptrdiff_t cal_end, int dt, int d, int n,
                         std::uint64_t B, std::uint64_t seed) {
    return calibrate_ao(panel, {0, cal_end}, dt, d, B, n, seed);
}

SweepSpec small_spec() {
    SweepSpec spec;
    spec.delta_train_grid = {40};
    spec.delta_test_grid = {40};
    spec.n_grid = {6};
    spec.replications = 1;
    spec.stride = 40;
    spec.seed = 7;
    spec.nls_folds = 5;
    spec.scale = MatrixScale::correlation;
    return spec;
}

} // namespace

TEST_CASE("run_backtest: oracle weakly dominates on shared windows (Frobenius, correlation scale)") {
    ReturnsPanel panel = rotating_panel(6, 1400, 0.02, 81);
    AOCalibration cal = calibrated(panel, 800, 40, 40, 6, 60, 3);

    SweepSpec spec = small_spec();
    BacktestResult res = run_backtest(panel, cal, spec, {840, 1400});
    REQUIRE(res.records.size() > 0);

    std::map<std::ptrdiff_t, std::map<EstimatorId, double>> frob;
    for (const auto& r : res.records) {
        if (r.metric == MetricId::frobenius) frob[r.date_index][r.estimator] = r.value;
    }
    int cells = 0;
    for (const auto& [date, by_est] : frob) {
        REQUIRE(by_est.count(EstimatorId::oracle) == 1);
        double oracle = by_est.at(EstimatorId::oracle);
        for (const auto& [est, value] : by_est) {
            CHECK(oracle <= value + 1e-10);
        }
        ++cells;
    }
    CHECK(cells >= 10);
}

TEST_CASE("run_backtest: causality audit via the access observer") {
    ReturnsPanel panel = rotating_panel(5, 900, 0.02, 82);
    AOCalibration cal = calibrated(panel, 600, 30, 30, 5, 40, 4);

    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {30};
    spec.n_grid = {5};
    spec.stride = 25;
    spec.workers = 2;

    std::mutex mu;
    struct Event {
        AccessPurpose purpose;
        EstimatorId estimator;
        IndexRange range;
        std::ptrdiff_t date;
    };
    std::vector<Event> events;
    spec.access_observer = [&](AccessPurpose p, EstimatorId e, IndexRange r, std::ptrdiff_t date) {
        std::lock_guard<std::mutex> lock(mu);
        events.push_back({p, e, r, date});
    };

    run_backtest(panel, cal, spec, {630, 900});
    REQUIRE(events.size() > 0);

    std::size_t estimator_reads = 0, lookahead_reads = 0;
    for (const auto& ev : events) {
        switch (ev.purpose) {
            case AccessPurpose::estimator_input:
                // no estimator input may touch any row at or past the test start
                CHECK(ev.range.end <= ev.date);
                CHECK(ev.estimator != EstimatorId::oracle);
                ++estimator_reads;
                break;
            case AccessPurpose::oracle_lookahead:
                CHECK(ev.estimator == EstimatorId::oracle);
                CHECK(ev.range.begin >= ev.date);
                ++lookahead_reads;
                break;
            case AccessPurpose::metric_realized:
                CHECK(ev.range.begin >= ev.date);
                break;
        }
    }
    CHECK(estimator_reads > 0);
    CHECK(lookahead_reads > 0);
}

TEST_CASE("run_backtest: record counts follow the grid") {
    ReturnsPanel panel = rotating_panel(5, 900, 0.01, 83);
    AOCalibration cal = calibrated(panel, 600, 30, 30, 5, 40, 5);

    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30, 40};
    spec.delta_test_grid = {30};
    spec.n_grid = {5};
    spec.replications = 2;
    spec.stride = 30;
    spec.estimators = {EstimatorId::sample, EstimatorId::average_oracle};

    BacktestResult res = run_backtest(panel, cal, spec, {640, 900});
    CHECK(res.grid.size() == 2);

    // dates per grid point: t = 640, 670, ..., 850 (t + 30 <= 900) -> 8 dates
    const std::size_t cells = 2 /*grid*/ * 2 /*reps*/ * 8 /*dates*/;
    CHECK(res.records.size() ==
          (cells - res.infeasible_cells) * 2 /*estimators*/ * 3 /*metrics*/);

    // canonical sort order
    for (std::size_t i = 1; i < res.records.size(); ++i) {
        const auto& a = res.records[i - 1];
        const auto& b = res.records[i];
        auto key = [](const BenchmarkRecord& r) {
            return std::make_tuple(r.grid_index, r.replication, r.date_index,
                                   static_cast<int>(r.estimator), static_cast<int>(r.metric));
        };
        CHECK(key(a) < key(b));
    }
}

TEST_CASE("run_backtest: deterministic across worker counts") {
    ReturnsPanel panel = rotating_panel(5, 800, 0.02, 84);
    AOCalibration cal = calibrated(panel, 500, 30, 30, 5, 30, 6);

    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {30};
    spec.n_grid = {5};
    spec.stride = 20;

    spec.workers = 1;
    BacktestResult a = run_backtest(panel, cal, spec, {530, 800});
    spec.workers = 3;
    BacktestResult b = run_backtest(panel, cal, spec, {530, 800});

    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].value == b.records[i].value);
        CHECK(a.records[i].skipped == b.records[i].skipped);
        CHECK(a.records[i].date_index == b.records[i].date_index);
    }
}

TEST_CASE("run_backtest: causality precondition against the calibration range") {
    ReturnsPanel panel = rotating_panel(5, 800, 0.02, 85);
    AOCalibration cal = calibrated(panel, 600, 30, 30, 5, 30, 7);
    SweepSpec spec = small_spec();
    spec.n_grid = {5};
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {30};
    CHECK_THROWS_AS(run_backtest(panel, cal, spec, {400, 800}), DataError);
}

TEST_CASE("run_backtest: shuffle flag changes the records") {
    ReturnsPanel panel = rotating_panel(5, 900, 0.05, 86);
    AOCalibration cal = calibrated(panel, 600, 30, 30, 5, 40, 8);

    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {30};
    spec.n_grid = {5};
    spec.stride = 40;

    BacktestResult plain = run_backtest(panel, cal, spec, {630, 900});
    spec.shuffle = true;
    BacktestResult shuffled = run_backtest(panel, cal, spec, {630, 900});
    REQUIRE(plain.records.size() == shuffled.records.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < plain.records.size(); ++i) {
        if (plain.records[i].value != shuffled.records[i].value) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("run_backtest: singular realized matrices are skipped and tallied for KL") {
    // delta_test < n forces a rank-deficient test correlation matrix
    ReturnsPanel panel = rotating_panel(8, 700, 0.02, 88);
    AOCalibration cal = calibrated(panel, 400, 30, 30, 8, 30, 10);
    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {6};
    spec.n_grid = {8};
    spec.stride = 50;
    BacktestResult res = run_backtest(panel, cal, spec, {430, 700});
    CHECK(res.kl_skips > 0);
    for (const auto& r : res.records) {
        if (r.metric == MetricId::kl) {
            CHECK(r.skipped);
            CHECK(std::isnan(r.value));
        } else {
            CHECK_FALSE(r.skipped);
            CHECK(std::isfinite(r.value));
        }
    }
}

TEST_CASE("records and summary files are written and parse back") {
    ReturnsPanel panel = rotating_panel(5, 800, 0.02, 87);
    AOCalibration cal = calibrated(panel, 500, 30, 30, 5, 30, 9);
    SweepSpec spec = small_spec();
    spec.delta_train_grid = {30};
    spec.delta_test_grid = {30};
    spec.n_grid = {5};
    spec.stride = 60;
    BacktestResult res = run_backtest(panel, cal, spec, {530, 800});

    write_records_csv(res, "records_test.csv");
    write_summary_jsonl(res, "summary_test.jsonl");

    std::ifstream rec("records_test.csv");
    std::string header;
    std::getline(rec, header);
    CHECK(header ==
          "grid_index,replication,date_index,delta_train,delta_test,n,estimator,metric,value,skipped");
    std::size_t lines = 0;
    for (std::string line; std::getline(rec, line);) ++lines;
    CHECK(lines == res.records.size());

    std::ifstream summary("summary_test.jsonl");
    std::size_t summary_lines = 0;
    for (std::string line; std::getline(summary, line);) {
        CHECK(line.front() == '{');
        CHECK(line.back() == '}');
        CHECK(line.find("\"mean\":") != std::string::npos);
        ++summary_lines;
    }
    // 4 estimators x 3 metrics on one grid point
    CHECK(summary_lines == 12);
    std::remove("records_test.csv");
    std::remove("summary_test.jsonl");
}
