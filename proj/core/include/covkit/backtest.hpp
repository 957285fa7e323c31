#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "covkit/calibration.hpp"
#include "covkit/estimators.hpp"
#include "covkit/panel.hpp"

namespace covkit {

enum class MetricId { frobenius, kl, gmv_volatility };

std::string to_string(MetricId metric);

enum class MatrixScale { correlation, covariance };

/// Which role a row range is read for; the hook lets tests audit that no
/// estimator other than the flagged oracle ever touches test-window rows.
enum class AccessPurpose { estimator_input, oracle_lookahead, metric_realized };

struct BenchmarkRecord {
    int grid_index = 0;
    int replication = 0;
    std::ptrdiff_t date_index = 0;
    int delta_train = 0;
    int delta_test = 0;
    int n = 0;
    EstimatorId estimator = EstimatorId::sample;
    MetricId metric = MetricId::frobenius;
    double value = 0.0;
    bool skipped = false;  // KL with a non-positive-definite input
};

struct SweepSpec {
    std::vector<int> delta_train_grid{252};
    std::vector<int> delta_test_grid{252};
    std::vector<int> n_grid{100};
    std::vector<EstimatorId> estimators{EstimatorId::sample, EstimatorId::average_oracle,
                                        EstimatorId::nls_cv, EstimatorId::oracle};
    int replications = 1;
    std::ptrdiff_t stride = 5;        // evaluation-date spacing
    std::uint64_t seed = 0;
    bool shuffle = false;             // permute each train+test union before splitting
    int nls_folds = 10;
    bool nls_on_returns = false;      // NLS from raw returns instead of z-scores
    MatrixScale scale = MatrixScale::covariance;
    bool kl_base_n = true;
    double max_missing_frac = 0.20;
    double max_pair_corr = 0.95;
    int workers = 0;

    // Test-only causality audit hook; called for every row-range read with
    // the evaluation date (= test-window start) of the owning cell. May be
    // invoked concurrently when workers > 1.
    std::function<void(AccessPurpose, EstimatorId, IndexRange, std::ptrdiff_t)> access_observer;
};

struct GridPoint {
    int delta_train = 0;
    int delta_test = 0;
    int n = 0;
};

struct BacktestResult {
    std::vector<BenchmarkRecord> records;  // sorted by (grid, replication, date, estimator, metric)
    std::vector<GridPoint> grid;
    std::uint64_t kl_skips = 0;
    std::uint64_t infeasible_cells = 0;
};

/// Rolling-window comparison of the estimator set on out-of-sample dates.
/// Every estimator inside one (grid, replication, date) cell sees the same
/// window and asset draw, so metric differences are paired.
BacktestResult run_backtest(const ReturnsPanel& panel, const AOCalibration& calibration,
                            const SweepSpec& spec, const IndexRange& out_of_sample);

/// Plot-ready persistence: one CSV row per record, plus a JSON-lines summary
/// (per grid point / estimator / metric: mean, standard error, counts).
void write_records_csv(const BacktestResult& result, const std::string& path);
void write_summary_jsonl(const BacktestResult& result, const std::string& path);

} // namespace covkit
