#include "covkit/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>

#include "covkit/errors.hpp"
#include "covkit/format.hpp"
#include "covkit/metrics.hpp"
#include "covkit/parallel.hpp"
#include "covkit/portfolio.hpp"
#include "covkit/rng.hpp"

namespace covkit {

namespace {

struct CellKey {
    int grid_index;
    int replication;
    std::ptrdiff_t date;
};

struct CellOutput {
    std::vector<BenchmarkRecord> records;
    bool infeasible = false;
};

// Per-column unbiased variance over present values of a (possibly shuffled)
// window slice.
Vector present_variances(const Matrix& vals, const BoolMatrix& mask) {
    Vector var(vals.cols());
    for (Eigen::Index c = 0; c < vals.cols(); ++c) {
        double sum = 0;
        Eigen::Index m = 0;
        for (Eigen::Index r = 0; r < vals.rows(); ++r) {
            if (mask(r, c)) {
                sum += vals(r, c);
                ++m;
            }
        }
        if (m < 2) throw DataError("variance: fewer than 2 observations in a column");
        double mean = sum / static_cast<double>(m);
        double ss = 0;
        for (Eigen::Index r = 0; r < vals.rows(); ++r) {
            if (mask(r, c)) {
                double d = vals(r, c) - mean;
                ss += d * d;
            }
        }
        var(c) = ss / static_cast<double>(m - 1);
        if (var(c) <= 0.0) throw DataError("variance: degenerate column in window");
    }
    return var;
}

Matrix mean_imputed(const Matrix& vals, const BoolMatrix& mask) {
    Matrix out = vals;
    for (Eigen::Index c = 0; c < vals.cols(); ++c) {
        double sum = 0;
        Eigen::Index m = 0;
        for (Eigen::Index r = 0; r < vals.rows(); ++r) {
            if (mask(r, c)) {
                sum += vals(r, c);
                ++m;
            }
        }
        double mean = m > 0 ? sum / static_cast<double>(m) : 0.0;
        for (Eigen::Index r = 0; r < vals.rows(); ++r) {
            if (!mask(r, c)) out(r, c) = mean;
        }
    }
    return out;
}

CellOutput evaluate_cell(const ReturnsPanel& panel, const AOCalibration& calibration,
                         const SweepSpec& spec, const std::vector<GridPoint>& grid,
                         const CellKey& key) {
    const GridPoint& gp = grid[static_cast<std::size_t>(key.grid_index)];
    const IndexRange train{key.date - gp.delta_train, key.date};
    const IndexRange test{key.date, key.date + gp.delta_test};

    auto observe = [&](AccessPurpose purpose, EstimatorId estimator, IndexRange range) {
        if (spec.access_observer) spec.access_observer(purpose, estimator, range, key.date);
    };

    CellOutput out;
    auto infeasible = [&]() {
        out.infeasible = true;
        out.records.clear();
        return out;
    };

    std::vector<int> eligible;
    try {
        eligible = filter_assets(panel, train, spec.max_missing_frac, spec.max_pair_corr);
    } catch (const DataError&) {
        return infeasible();
    }
    if (static_cast<int>(eligible.size()) < gp.n) return infeasible();

    auto eng = rng::engine(spec.seed, {rng::stream::backtest, static_cast<std::uint64_t>(key.grid_index),
                                       static_cast<std::uint64_t>(key.replication),
                                       static_cast<std::uint64_t>(key.date)});
    auto picks = rng::sample_without_replacement(eng, eligible.size(),
                                                 static_cast<std::uint64_t>(gp.n));
    std::vector<int> chosen;
    chosen.reserve(picks.size());
    for (auto p : picks) chosen.push_back(eligible[static_cast<std::size_t>(p)]);

    Matrix train_vals = panel.slice(train, chosen);
    Matrix test_vals = panel.slice(test, chosen);
    BoolMatrix train_mask = panel.mask_slice(train, chosen);
    BoolMatrix test_mask = panel.mask_slice(test, chosen);

    if (spec.shuffle) {
        auto perm = shuffle_permutation(
            static_cast<std::size_t>(gp.delta_train + gp.delta_test),
            rng::derive(spec.seed, {rng::stream::shuffle, static_cast<std::uint64_t>(key.grid_index),
                                    static_cast<std::uint64_t>(key.replication),
                                    static_cast<std::uint64_t>(key.date)}));
        Matrix vals(gp.delta_train + gp.delta_test, train_vals.cols());
        BoolMatrix mask(gp.delta_train + gp.delta_test, train_vals.cols());
        vals.topRows(gp.delta_train) = train_vals;
        vals.bottomRows(gp.delta_test) = test_vals;
        mask.topRows(gp.delta_train) = train_mask;
        mask.bottomRows(gp.delta_test) = test_mask;
        for (std::ptrdiff_t r = 0; r < gp.delta_train; ++r) {
            auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]);
            train_vals.row(r) = vals.row(src);
            train_mask.row(r) = mask.row(src);
        }
        for (std::ptrdiff_t r = 0; r < gp.delta_test; ++r) {
            auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(gp.delta_train + r)]);
            test_vals.row(r) = vals.row(src);
            test_mask.row(r) = mask.row(src);
        }
    }

    Matrix train_std, test_std;
    Vector train_var, test_var;
    try {
        train_std = standardize(train_vals, train_mask);
        test_std = standardize(test_vals, test_mask);
        train_var = present_variances(train_vals, train_mask);
        test_var = present_variances(test_vals, test_mask);
    } catch (const DataError&) {
        return infeasible();
    }

    Matrix train_corr = sample_covariance(train_std);
    Matrix test_corr = sample_covariance(test_std);
    EigenSystem train_es = eigendecompose(train_corr);

    Matrix sigma_test = test_corr;
    if (spec.scale == MatrixScale::covariance) {
        Vector sd = test_var.array().sqrt();
        sigma_test = sd.asDiagonal() * test_corr * sd.asDiagonal();
    }

    Vector train_sd = train_var.array().sqrt();

    for (EstimatorId estimator : spec.estimators) {
        Matrix estimate;
        try {
            if (estimator == EstimatorId::nls_cv && spec.nls_on_returns) {
                observe(AccessPurpose::estimator_input, estimator, train);
                Matrix raw = mean_imputed(train_vals, train_mask);
                EigenSystem raw_es = eigendecompose(sample_covariance(raw));
                Vector spectrum = nls_cv_eigenvalues(raw, spec.nls_folds);
                estimate = apply_rie(raw_es.eigenvectors, spectrum).matrix;
                if (spec.scale == MatrixScale::correlation) {
                    Vector d = estimate.diagonal().array().max(1e-300).sqrt().inverse();
                    estimate = d.asDiagonal() * estimate * d.asDiagonal();
                }
            } else {
                Vector spectrum;
                switch (estimator) {
                    case EstimatorId::sample:
                        observe(AccessPurpose::estimator_input, estimator, train);
                        spectrum = train_es.eigenvalues;
                        break;
                    case EstimatorId::average_oracle:
                        observe(AccessPurpose::estimator_input, estimator, train);
                        if (calibration.n != gp.n) {
                            throw DataError("backtest: calibration n does not match grid n");
                        }
                        spectrum = calibration.lambdas;
                        break;
                    case EstimatorId::nls_cv:
                        observe(AccessPurpose::estimator_input, estimator, train);
                        spectrum = nls_cv_eigenvalues(train_std, spec.nls_folds);
                        break;
                    case EstimatorId::oracle:
                        observe(AccessPurpose::oracle_lookahead, estimator, test);
                        spectrum = oracle_eigenvalues(train_es.eigenvectors, test_corr);
                        break;
                }
                estimate = apply_rie(train_es.eigenvectors, floor_eigenvalues(spectrum)).matrix;
                if (spec.scale == MatrixScale::covariance) {
                    estimate = train_sd.asDiagonal() * estimate * train_sd.asDiagonal();
                }
            }
        } catch (const DataError&) {
            return infeasible();
        }

        observe(AccessPurpose::metric_realized, estimator, test);

        BenchmarkRecord base;
        base.grid_index = key.grid_index;
        base.replication = key.replication;
        base.date_index = key.date;
        base.delta_train = gp.delta_train;
        base.delta_test = gp.delta_test;
        base.n = gp.n;
        base.estimator = estimator;

        BenchmarkRecord rec = base;
        rec.metric = MetricId::frobenius;
        rec.value = frobenius(estimate, sigma_test);
        out.records.push_back(rec);

        rec = base;
        rec.metric = MetricId::kl;
        if (auto kl = kl_divergence(sigma_test, estimate, spec.kl_base_n)) {
            rec.value = *kl;
        } else {
            rec.value = std::numeric_limits<double>::quiet_NaN();
            rec.skipped = true;
        }
        out.records.push_back(rec);

        rec = base;
        rec.metric = MetricId::gmv_volatility;
        rec.value = realized_volatility(gmv_weights(estimate), sigma_test);
        out.records.push_back(rec);
    }
    return out;
}

} // namespace

std::string to_string(MetricId metric) {
    switch (metric) {
        case MetricId::frobenius: return "frobenius";
        case MetricId::kl: return "kl";
        case MetricId::gmv_volatility: return "gmv_volatility";
    }
    return "unknown";
}

BacktestResult run_backtest(const ReturnsPanel& panel, const AOCalibration& calibration,
                            const SweepSpec& spec, const IndexRange& out_of_sample) {
    if (spec.replications < 1) throw DataError("backtest: replications must be >= 1");
    if (spec.stride < 1) throw DataError("backtest: stride must be >= 1");
    if (spec.estimators.empty()) throw DataError("backtest: empty estimator set");
    if (!IndexRange{0, panel.rows()}.contains(out_of_sample)) {
        throw DataError("backtest: out-of-sample range outside panel");
    }

    const bool uses_ao =
        std::find(spec.estimators.begin(), spec.estimators.end(), EstimatorId::average_oracle) !=
        spec.estimators.end();
    if (uses_ao && out_of_sample.begin < calibration.range_end_row) {
        throw DataError("backtest: out-of-sample range must start at or after the calibration "
                        "range end (row " + std::to_string(calibration.range_end_row) + ")");
    }

    BacktestResult result;
    for (int dt : spec.delta_train_grid) {
        for (int dtest : spec.delta_test_grid) {
            for (int n : spec.n_grid) {
                if (dt < 2 || dtest < 2 || n < 2) {
                    throw DataError("backtest: window lengths and n must be >= 2");
                }
                result.grid.push_back(GridPoint{dt, dtest, n});
            }
        }
    }

    std::vector<CellKey> cells;
    for (int g = 0; g < static_cast<int>(result.grid.size()); ++g) {
        const GridPoint& gp = result.grid[static_cast<std::size_t>(g)];
        for (int r = 0; r < spec.replications; ++r) {
            for (std::ptrdiff_t t = out_of_sample.begin; t + gp.delta_test <= out_of_sample.end;
                 t += spec.stride) {
                if (t - gp.delta_train < 0) {
                    ++result.infeasible_cells;
                    continue;
                }
                cells.push_back(CellKey{g, r, t});
            }
        }
    }

    auto outputs = parallel_map<CellOutput>(cells.size(), spec.workers, [&](std::size_t i) {
        return evaluate_cell(panel, calibration, spec, result.grid, cells[i]);
    });

    for (const auto& cell : outputs) {
        if (cell.infeasible) {
            ++result.infeasible_cells;
            continue;
        }
        for (const auto& rec : cell.records) {
            if (rec.skipped) ++result.kl_skips;
            result.records.push_back(rec);
        }
    }

    std::sort(result.records.begin(), result.records.end(),
              [](const BenchmarkRecord& a, const BenchmarkRecord& b) {
                  return std::tie(a.grid_index, a.replication, a.date_index, a.estimator, a.metric) <
                         std::tie(b.grid_index, b.replication, b.date_index, b.estimator, b.metric);
              });
    return result;
}

void write_records_csv(const BacktestResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open records file: " + path);
    out << "grid_index,replication,date_index,delta_train,delta_test,n,estimator,metric,value,skipped\n";
    for (const auto& r : result.records) {
        out << r.grid_index << ',' << r.replication << ',' << r.date_index << ',' << r.delta_train
            << ',' << r.delta_test << ',' << r.n << ',' << to_string(r.estimator) << ','
            << to_string(r.metric) << ',';
        if (!r.skipped) out << format_double(r.value);
        out << ',' << (r.skipped ? 1 : 0) << '\n';
    }
    if (!out) throw DataError("failed writing records file: " + path);
}

void write_summary_jsonl(const BacktestResult& result, const std::string& path) {
    struct Stats {
        std::size_t count = 0;
        std::size_t skipped = 0;
        double sum = 0;
        double sum_sq = 0;
    };
    // key: (grid, estimator, metric) in record sort order
    std::map<std::tuple<int, int, int>, Stats> groups;
    for (const auto& r : result.records) {
        auto& s = groups[{r.grid_index, static_cast<int>(r.estimator), static_cast<int>(r.metric)}];
        if (r.skipped) {
            ++s.skipped;
            continue;
        }
        ++s.count;
        s.sum += r.value;
        s.sum_sq += r.value * r.value;
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open summary file: " + path);
    for (const auto& [key, s] : groups) {
        const auto& gp = result.grid[static_cast<std::size_t>(std::get<0>(key))];
        double mean = s.count > 0 ? s.sum / static_cast<double>(s.count) : 0.0;
        double se = 0.0;
        if (s.count > 1) {
            double var = (s.sum_sq - s.sum * mean) / static_cast<double>(s.count - 1);
            se = std::sqrt(std::max(var, 0.0) / static_cast<double>(s.count));
        }
        out << "{\"grid_index\":" << std::get<0>(key) << ",\"delta_train\":" << gp.delta_train
            << ",\"delta_test\":" << gp.delta_test << ",\"n\":" << gp.n << ",\"estimator\":\""
            << to_string(static_cast<EstimatorId>(std::get<1>(key))) << "\",\"metric\":\""
            << to_string(static_cast<MetricId>(std::get<2>(key))) << "\",\"count\":" << s.count
            << ",\"skipped\":" << s.skipped << ",\"mean\":" << format_double(mean)
            << ",\"std_error\":" << format_double(se) << "}\n";
    }
    if (!out) throw DataError("failed writing summary file: " + path);
}

} // namespace covkit
