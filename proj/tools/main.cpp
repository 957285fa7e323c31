// covkit command-line interface: calibrate eigenvalue spectra, filter
// covariance matrices, run backtests and diagnostics, generate synthetic
// panels. Every stochastic subcommand takes a mandatory --seed and is
// byte-reproducible for a fixed (config, seed), independent of --workers.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covkit/backtest.hpp"
#include "covkit/calibration.hpp"
#include "covkit/errors.hpp"
#include "covkit/experiments.hpp"
#include "covkit/format.hpp"
#include "covkit/metrics.hpp"
#include "covkit/panel.hpp"
#include "covkit/parallel.hpp"
#include "covkit/synth.hpp"

namespace {

using covkit::DataError;
using covkit::Matrix;
using covkit::ReturnsPanel;
using covkit::Vector;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInfeasible = 4;

bool looks_like_date(const std::string& s) {
    return s.size() == 10 && s[4] == '-' && s[7] == '-';
}

// Bound specs accept an ISO date (mapped to the first row at or after it) or
// a plain row index. An empty spec resolves to the given default.
std::ptrdiff_t parse_bound(const ReturnsPanel& panel, const std::string& spec,
                           std::ptrdiff_t fallback) {
    if (spec.empty()) return fallback;
    if (looks_like_date(spec)) {
        auto it = std::lower_bound(panel.dates.begin(), panel.dates.end(), spec);
        return it - panel.dates.begin();
    }
    try {
        std::size_t pos = 0;
        long v = std::stol(spec, &pos);
        if (pos != spec.size()) throw std::invalid_argument(spec);
        if (v < 0 || v > panel.rows()) throw DataError("row index out of range: " + spec);
        return v;
    } catch (const std::invalid_argument&) {
        throw DataError("cannot parse '" + spec + "' as a date or row index");
    } catch (const std::out_of_range&) {
        throw DataError("cannot parse '" + spec + "' as a date or row index");
    }
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

covkit::MatrixScale parse_scale(const std::string& s) {
    if (s == "correlation" || s == "corr") return covkit::MatrixScale::correlation;
    if (s == "covariance" || s == "cov") return covkit::MatrixScale::covariance;
    throw DataError("unknown scale '" + s + "' (want correlation|covariance)");
}

covkit::FactorLaw parse_law(const std::string& s) {
    if (s == "normal" || s == "gaussian") return covkit::FactorLaw::normal;
    if (s == "student-t" || s == "student_t" || s == "t") return covkit::FactorLaw::student_t;
    throw DataError("unknown factor law '" + s + "' (want normal|student-t)");
}

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& labels,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + path);
    out << "asset";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << labels[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << ',' << covkit::format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
    std::string input, output, cal_begin, cal_end;
    int delta_train = 252;
    int delta = 252;
    std::uint64_t samples = 10000;
    int n = 100;
    std::uint64_t seed = 0;
    std::string asset_mode = "random";
    double max_missing = 0.20;
    double max_pair_corr = 0.95;
    int retry_cap = 100;
    bool shuffle = false;
    bool with_overlap = false;
    int workers = 0;
};

int run_calibrate(const CalibrateArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::IndexRange cal{parse_bound(panel, args.cal_begin, 0),
                           parse_bound(panel, args.cal_end, panel.rows())};

    covkit::CalibrationOptions opt;
    opt.max_missing_frac = args.max_missing;
    opt.max_pair_corr = args.max_pair_corr;
    opt.retry_cap = args.retry_cap;
    opt.shuffle = args.shuffle;
    opt.workers = args.workers;
    if (args.asset_mode == "fixed") {
        opt.mode = covkit::AssetSamplingMode::fixed_set;
    } else if (args.asset_mode == "random") {
        opt.mode = covkit::AssetSamplingMode::random_subsets;
    } else {
        throw DataError("unknown asset mode '" + args.asset_mode + "' (want fixed|random)");
    }

    covkit::AOCalibration cal_result = covkit::calibrate_ao(
        panel, cal, args.delta_train, args.delta, args.samples, args.n, args.seed, opt);
    if (args.with_overlap) {
        cal_result.average_overlap = covkit::average_overlap(
            panel, cal, args.delta_train, args.delta, args.samples, args.n, args.seed, opt);
    }
    covkit::save_calibration(cal_result, args.output);

    std::cout << "calibrated " << args.n << " eigenvalues from " << args.samples
              << " interval pairs over rows [" << cal.begin << ", " << cal.end << ") ("
              << cal_result.range_begin_date << " .. " << cal_result.range_end_date << ")\n";
    std::cout << "rank,lambda,inverse_lambda\n";
    for (int k = 0; k < args.n; ++k) {
        std::cout << k + 1 << ',' << covkit::format_double(cal_result.lambdas(k)) << ','
                  << covkit::format_double(1.0 / cal_result.lambdas(k)) << '\n';
    }
    std::cout << "wrote " << args.output << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// filter

struct FilterArgs {
    std::string input, calibration, output, asof, assets;
    std::string scale = "covariance";
};

int run_filter(const FilterArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::AOCalibration cal = covkit::load_calibration(args.calibration);

    std::vector<std::string> wanted =
        args.assets.empty() ? panel.assets : split_list(args.assets);
    if (static_cast<int>(wanted.size()) != cal.n) {
        throw DataError("calibration mismatch: calibration expects n = " + std::to_string(cal.n) +
                        " assets, got " + std::to_string(wanted.size()));
    }
    std::vector<int> columns;
    columns.reserve(wanted.size());
    for (const auto& id : wanted) {
        auto it = std::find(panel.assets.begin(), panel.assets.end(), id);
        if (it == panel.assets.end()) throw DataError("asset not in panel: " + id);
        columns.push_back(static_cast<int>(it - panel.assets.begin()));
    }

    std::ptrdiff_t end = parse_bound(panel, args.asof, panel.rows());
    if (end - cal.delta_train < 0) {
        throw covkit::InfeasibleWindowError("not enough history before the as-of row for delta_train = " +
                                            std::to_string(cal.delta_train));
    }
    covkit::IndexRange train{end - cal.delta_train, end};

    Matrix vals = panel.slice(train, columns);
    covkit::BoolMatrix mask = panel.mask_slice(train, columns);
    Matrix x = covkit::standardize(vals, mask, wanted);

    covkit::EigenSystem train_es = covkit::eigendecompose(covkit::sample_covariance(x));
    double gap = covkit::min_eigen_gap(train_es.eigenvalues);
    if (gap < 1e-10) {
        std::cerr << "warning: near-degenerate train spectrum (smallest eigenvalue gap " << gap
                  << "); ordering inside the degenerate subspace is arbitrary\n";
    }
    covkit::FilteredCovariance filtered = covkit::apply_ao(cal, x);

    if (parse_scale(args.scale) == covkit::MatrixScale::covariance) {
        Vector variances(cal.n);
        for (int c = 0; c < cal.n; ++c) {
            double sum = 0, ss = 0;
            Eigen::Index m = 0;
            for (Eigen::Index r = 0; r < vals.rows(); ++r) {
                if (mask(r, c)) {
                    sum += vals(r, c);
                    ++m;
                }
            }
            double mean = sum / static_cast<double>(m);
            for (Eigen::Index r = 0; r < vals.rows(); ++r) {
                if (mask(r, c)) ss += (vals(r, c) - mean) * (vals(r, c) - mean);
            }
            variances(c) = ss / static_cast<double>(m - 1);
        }
        filtered = covkit::rescale_to_covariance(filtered, variances);
    }

    write_matrix_csv(filtered.matrix, wanted, args.output);
    std::cout << "filtered " << args.scale << " matrix for " << cal.n << " assets, train rows ["
              << train.begin << ", " << train.end << ") -> " << args.output << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    int n = 10;
    long records = 10000;
    double s = 0.0;
    double lambda_min = 1.0;
    double lambda_ratio = 1.5;
    std::string law = "normal";
    double nu = 5.0;
    std::uint64_t seed = 0;
    std::string output, truth;
    std::string start_date = "2000-01-03";
};

int run_synth(const SynthArgs& args) {
    covkit::SynthConfig cfg;
    cfg.n = args.n;
    cfg.record_count = args.records;
    cfg.rotation_sd = args.s;
    cfg.lambda_min = args.lambda_min;
    cfg.lambda_ratio = args.lambda_ratio;
    cfg.law = parse_law(args.law);
    cfg.student_dof = args.nu;
    cfg.seed = args.seed;
    cfg.basis_stride = args.records;  // panels do not carry bases

    covkit::SynthPath path = covkit::generate(cfg);
    ReturnsPanel panel = covkit::panel_from_synth(path, args.start_date);
    covkit::save_panel(panel, args.output);

    if (!args.truth.empty()) {
        nlohmann::ordered_json truth;
        truth["n"] = args.n;
        truth["records"] = args.records;
        truth["rotation_sd"] = args.s;
        truth["lambda_min"] = args.lambda_min;
        truth["lambda_ratio"] = args.lambda_ratio;
        truth["law"] = args.law;
        truth["student_dof"] = args.nu;
        truth["seed"] = args.seed;
        truth["lambda_true"] = std::vector<double>(path.lambda_true.data(),
                                                   path.lambda_true.data() + args.n);
        std::ofstream out(args.truth, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open sidecar file: " + args.truth);
        out << truth.dump(2) << '\n';
    }

    std::cout << "generated " << args.records << " x " << args.n << " panel (s = " << args.s
              << ", " << args.law << ") -> " << args.output << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// backtest

struct BacktestArgs {
    std::string input, calibration, records = "records.csv", summary = "summary.jsonl";
    std::string oos_begin, oos_end;
    std::vector<int> delta_train{252};
    std::vector<int> delta_test{252};
    std::vector<int> n{100};
    std::string estimators = "sample,average_oracle,nls_cv,oracle";
    int replications = 1;
    long stride = 5;
    std::uint64_t seed = 0;
    bool shuffle = false;
    int folds = 10;
    bool nls_returns = false;
    std::string scale = "covariance";
    bool kl_natural = false;
    double max_missing = 0.20;
    double max_pair_corr = 0.95;
    int workers = 0;
};

int run_backtest_cmd(const BacktestArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::AOCalibration cal = covkit::load_calibration(args.calibration);

    covkit::SweepSpec spec;
    spec.delta_train_grid = args.delta_train;
    spec.delta_test_grid = args.delta_test;
    spec.n_grid = args.n;
    spec.estimators.clear();
    for (const auto& name : split_list(args.estimators)) {
        spec.estimators.push_back(covkit::estimator_from_string(name));
    }
    spec.replications = args.replications;
    spec.stride = args.stride;
    spec.seed = args.seed;
    spec.shuffle = args.shuffle;
    spec.nls_folds = args.folds;
    spec.nls_on_returns = args.nls_returns;
    spec.scale = parse_scale(args.scale);
    spec.kl_base_n = !args.kl_natural;
    spec.max_missing_frac = args.max_missing;
    spec.max_pair_corr = args.max_pair_corr;
    spec.workers = args.workers;

    covkit::IndexRange oos{parse_bound(panel, args.oos_begin, cal.range_end_row),
                           parse_bound(panel, args.oos_end, panel.rows())};

    covkit::BacktestResult result = covkit::run_backtest(panel, cal, spec, oos);
    covkit::write_records_csv(result, args.records);
    covkit::write_summary_jsonl(result, args.summary);

    std::cout << result.records.size() << " records over " << result.grid.size()
              << " grid point(s); kl skips: " << result.kl_skips
              << ", infeasible cells: " << result.infeasible_cells << '\n';
    std::cout << "wrote " << args.records << " and " << args.summary << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct EntropyArgs {
    std::string input, output = "entropy.csv", cal_begin, cal_end;
    int delta_train = 252;
    int delta = 252;
    std::uint64_t samples = 1000;
    int n = 10;
    std::uint64_t seed = 0;
    bool shuffle = false;
    int bootstrap = 1000;
    int workers = 0;
};

int run_entropy(const EntropyArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::IndexRange cal{parse_bound(panel, args.cal_begin, 0),
                           parse_bound(panel, args.cal_end, panel.rows())};
    covkit::CalibrationOptions opt;
    opt.workers = args.workers;
    covkit::EntropyExperimentResult res =
        covkit::entropy_experiment(panel, cal, args.delta_train, args.delta, args.samples, args.n,
                                   args.seed, opt, args.bootstrap);

    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + args.output);
    out << "rank,ordered_mean,ordered_lo,ordered_hi";
    if (args.shuffle) out << ",shuffled_mean,shuffled_lo,shuffled_hi,diff_mean,diff_lo,diff_hi";
    out << '\n';
    for (int k = 0; k < args.n; ++k) {
        out << k + 1 << ',' << covkit::format_double(res.ordered_mean(k)) << ','
            << covkit::format_double(res.ordered_lo(k)) << ','
            << covkit::format_double(res.ordered_hi(k));
        if (args.shuffle) {
            out << ',' << covkit::format_double(res.shuffled_mean(k)) << ','
                << covkit::format_double(res.shuffled_lo(k)) << ','
                << covkit::format_double(res.shuffled_hi(k)) << ','
                << covkit::format_double(res.diff_mean(k)) << ','
                << covkit::format_double(res.diff_lo(k)) << ','
                << covkit::format_double(res.diff_hi(k));
        }
        out << '\n';
    }
    if (!res.bands_defined) {
        std::cout << "warning: single sample, confidence bands undefined\n";
    }
    std::cout << "mean entropy (ordered) " << res.ordered_mean.mean();
    if (args.shuffle) std::cout << ", (shuffled) " << res.shuffled_mean.mean();
    std::cout << " -> " << args.output << '\n';
    return 0;
}

struct SeparabilityArgs {
    std::string input, output = "separability.csv", cal_begin, cal_end;
    int delta_train = 252;
    int delta = 252;
    std::uint64_t samples = 1000;
    int n = 10;
    std::uint64_t seed = 0;
    int workers = 0;
};

int run_separability(const SeparabilityArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::IndexRange cal{parse_bound(panel, args.cal_begin, 0),
                           parse_bound(panel, args.cal_end, panel.rows())};
    covkit::CalibrationOptions opt;
    opt.workers = args.workers;
    covkit::SeparabilityDiagnostic diag = covkit::separability_diagnostic(
        panel, cal, args.delta_train, args.delta, args.samples, args.n, args.seed, opt);

    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + args.output);
    out << "rank,coupled,factored\n";
    for (int k = 0; k < args.n; ++k) {
        out << k + 1 << ',' << covkit::format_double(diag.coupled(k)) << ','
            << covkit::format_double(diag.factored(k)) << '\n';
    }
    std::cout << "separability: correlation " << diag.correlation << ", max relative deviation "
              << diag.max_relative_deviation << " -> " << args.output << '\n';
    return 0;
}

struct EigStabilityArgs {
    std::string input, output = "eig_stability.csv";
    std::string cal_begin, cal_end, test_begin, test_end;
    int delta_train = 252;
    int delta = 252;
    std::uint64_t samples = 1000;
    int n = 10;
    std::uint64_t seed = 0;
    int resamples = 10000;
    int workers = 0;
};

int run_eig_stability(const EigStabilityArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    std::ptrdiff_t half = panel.rows() / 2;
    covkit::IndexRange cal{parse_bound(panel, args.cal_begin, 0),
                           parse_bound(panel, args.cal_end, half)};
    covkit::IndexRange test{parse_bound(panel, args.test_begin, half),
                            parse_bound(panel, args.test_end, panel.rows())};
    covkit::CalibrationOptions opt;
    opt.workers = args.workers;
    covkit::EigStabilityResult res = covkit::eigenvalue_stability_experiment(
        panel, cal, test, args.delta_train, args.delta, args.samples, args.n, args.seed, opt,
        args.resamples);

    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + args.output);
    out << "draw,l1_diff,l2_diff\n";
    for (std::size_t i = 0; i < res.l1_diff.size(); ++i) {
        out << i << ',' << covkit::format_double(res.l1_diff[i]) << ','
            << covkit::format_double(res.l2_diff[i]) << '\n';
    }
    if (res.degenerate) std::cout << "warning: single-sample distributions\n";
    std::cout << "mean deviation difference: L1 " << res.l1_mean << " (p = " << res.l1_p_value
              << "), L2 " << res.l2_mean << " (p = " << res.l2_p_value << ") over "
              << args.samples << " draws -> " << args.output << '\n';
    return 0;
}

struct DeltaSweepArgs {
    std::string input, output = "delta_sweep.csv", cal_begin, cal_end;
    int delta_train = 252;
    std::vector<int> deltas;
    std::uint64_t samples = 1000;
    int n = 10;
    std::uint64_t seed = 0;
    int workers = 0;
};

int run_delta_sweep(const DeltaSweepArgs& args) {
    ReturnsPanel panel = covkit::load_panel(args.input);
    covkit::IndexRange cal{parse_bound(panel, args.cal_begin, 0),
                           parse_bound(panel, args.cal_end, panel.rows())};
    covkit::CalibrationOptions opt;
    opt.workers = args.workers;

    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + args.output);
    out << "delta,rank,lambda,inverse_lambda\n";
    for (int delta : args.deltas) {
        covkit::AOCalibration cal_result = covkit::calibrate_ao(
            panel, cal, args.delta_train, delta, args.samples, args.n, args.seed, opt);
        for (int k = 0; k < args.n; ++k) {
            out << delta << ',' << k + 1 << ','
                << covkit::format_double(cal_result.lambdas(k)) << ','
                << covkit::format_double(1.0 / cal_result.lambdas(k)) << '\n';
        }
        std::cout << "delta " << delta << ": lambda range ["
                  << cal_result.lambdas.minCoeff() << ", " << cal_result.lambdas.maxCoeff()
                  << "]\n";
    }
    std::cout << "wrote " << args.output << '\n';
    return 0;
}

struct SynthBenchArgs {
    int n = 10;
    long records = 10000;
    int delta_train = 50;
    int delta_test = 50;
    std::uint64_t samples = 2000;
    int replications = 200;
    std::vector<double> s_values;
    std::string law = "normal";
    double nu = 5.0;
    double lambda_min = 1.0;
    double lambda_ratio = 1.5;
    std::uint64_t seed = 0;
    std::string output = "synth_bench.csv";
    int workers = 0;
};

int run_synth_bench(const SynthBenchArgs& args) {
    covkit::SynthBenchConfig cfg;
    cfg.n = args.n;
    cfg.record_count = args.records;
    cfg.delta_train = args.delta_train;
    cfg.delta_test = args.delta_test;
    cfg.overlap_samples = args.samples;
    cfg.replications = args.replications;
    cfg.rotation_sds = args.s_values;
    cfg.law = parse_law(args.law);
    cfg.student_dof = args.nu;
    cfg.lambda_min = args.lambda_min;
    cfg.lambda_ratio = args.lambda_ratio;
    cfg.seed = args.seed;
    cfg.workers = args.workers;

    auto points = covkit::run_synth_benchmark(cfg);

    std::ofstream out(args.output, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + args.output);
    out << "s,mean_gap,std_error,replications\n";
    for (const auto& p : points) {
        out << covkit::format_double(p.rotation_sd) << ',' << covkit::format_double(p.mean_gap)
            << ',' << covkit::format_double(p.std_error) << ',' << p.gaps.size() << '\n';
        std::cout << "s = " << p.rotation_sd << ": gap " << p.mean_gap << " +- " << p.std_error
                  << '\n';
    }
    std::cout << "wrote " << args.output << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"covariance filtering with a calibrated time-independent eigenvalue spectrum"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value configuration file (CLI flags take precedence)");

    CalibrateArgs calibrate_args;
    auto* calibrate = app.add_subcommand(
        "calibrate", "Average oracle eigenvalues over bootstrap interval pairs");
    calibrate->add_option("--input", calibrate_args.input, "Returns panel CSV")->required();
    calibrate->add_option("--output", calibrate_args.output, "Calibration file to write")->required();
    calibrate->add_option("--cal-begin", calibrate_args.cal_begin,
                          "Calibration range start (date or row; default first row)");
    calibrate->add_option("--cal-end", calibrate_args.cal_end,
                          "Calibration range end, exclusive (date or row; default past-the-end)");
    calibrate->add_option("--delta-train", calibrate_args.delta_train, "Train window length")
        ->capture_default_str();
    calibrate->add_option("--delta", calibrate_args.delta, "Next window length")
        ->capture_default_str();
    calibrate->add_option("--B,--samples", calibrate_args.samples, "Bootstrap interval pairs")
        ->capture_default_str();
    calibrate->add_option("--n", calibrate_args.n, "Assets per sample")->capture_default_str();
    calibrate->add_option("--seed", calibrate_args.seed, "Random seed")->required();
    calibrate->add_option("--asset-mode", calibrate_args.asset_mode,
                          "Asset sampling: random subsets or the fixed panel set (random|fixed)")
        ->capture_default_str();
    calibrate->add_option("--max-missing", calibrate_args.max_missing,
                          "Max zero-or-missing fraction per asset in the train window")
        ->capture_default_str();
    calibrate->add_option("--max-pair-corr", calibrate_args.max_pair_corr,
                          "Duplicate-asset correlation threshold")
        ->capture_default_str();
    calibrate->add_option("--retry-cap", calibrate_args.retry_cap,
                          "Re-draws per bootstrap slot before failing")
        ->capture_default_str();
    calibrate->add_flag("--shuffle", calibrate_args.shuffle,
                        "Shuffle each prev+next union before splitting");
    calibrate->add_flag("--with-overlap", calibrate_args.with_overlap,
                        "Also store the average squared overlap matrix");
    calibrate->add_option("--workers", calibrate_args.workers,
                          "Worker threads (0: COVKIT_WORKERS env or hardware)");
    calibrate->callback([&] { std::exit(run_calibrate(calibrate_args)); });

    FilterArgs filter_args;
    auto* filter = app.add_subcommand("filter", "Filter one covariance matrix with a calibration");
    filter->add_option("--input", filter_args.input, "Returns panel CSV")->required();
    filter->add_option("--calibration", filter_args.calibration, "Calibration file")->required();
    filter->add_option("--output", filter_args.output, "Filtered matrix CSV")->required();
    filter->add_option("--asof", filter_args.asof,
                       "Train window end, exclusive (date or row; default panel end)");
    filter->add_option("--assets", filter_args.assets,
                       "Comma-separated asset ids (default: all panel assets)");
    filter->add_option("--scale", filter_args.scale, "Output scale (correlation|covariance)")
        ->capture_default_str();
    filter->callback([&] { std::exit(run_filter(filter_args)); });

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a rotating-eigenbasis synthetic panel");
    synth->add_option("--n", synth_args.n, "Dimension")->capture_default_str();
    synth->add_option("--T,--records", synth_args.records, "Record count")->capture_default_str();
    synth->add_option("--s", synth_args.s, "Per-step rotation angle sd (radians)")
        ->capture_default_str();
    synth->add_option("--lambda-min", synth_args.lambda_min, "Smallest true eigenvalue")
        ->capture_default_str();
    synth->add_option("--lambda-ratio", synth_args.lambda_ratio, "Geometric progression ratio")
        ->capture_default_str();
    synth->add_option("--law", synth_args.law, "Factor law (normal|student-t)")
        ->capture_default_str();
    synth->add_option("--nu", synth_args.nu, "Student-t degrees of freedom (> 2)")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.seed, "Random seed")->required();
    synth->add_option("--output", synth_args.output, "Panel CSV to write")->required();
    synth->add_option("--truth", synth_args.truth, "Optional JSON sidecar with the true spectrum");
    synth->add_option("--start-date", synth_args.start_date, "First calendar date")
        ->capture_default_str();
    synth->callback([&] { std::exit(run_synth(synth_args)); });

    BacktestArgs backtest_args;
    auto* backtest = app.add_subcommand(
        "backtest", "Rolling-window estimator comparison on out-of-sample dates");
    backtest->add_option("--input", backtest_args.input, "Returns panel CSV")->required();
    backtest->add_option("--calibration", backtest_args.calibration, "Calibration file")->required();
    backtest->add_option("--records", backtest_args.records, "Per-record CSV output")
        ->capture_default_str();
    backtest->add_option("--summary", backtest_args.summary, "JSON-lines summary output")
        ->capture_default_str();
    backtest->add_option("--oos-begin", backtest_args.oos_begin,
                         "Out-of-sample start (date or row; default calibration end)");
    backtest->add_option("--oos-end", backtest_args.oos_end,
                         "Out-of-sample end, exclusive (date or row; default panel end)");
    backtest->add_option("--delta-train", backtest_args.delta_train, "Train window grid")
        ->capture_default_str();
    backtest->add_option("--delta-test", backtest_args.delta_test, "Test window grid")
        ->capture_default_str();
    backtest->add_option("--n", backtest_args.n, "Asset count grid")->capture_default_str();
    backtest->add_option("--estimators", backtest_args.estimators,
                         "Comma list of sample,average_oracle,nls_cv,oracle")
        ->capture_default_str();
    backtest->add_option("--replications", backtest_args.replications,
                         "Independent asset draws per date")
        ->capture_default_str();
    backtest->add_option("--stride", backtest_args.stride, "Evaluation date spacing")
        ->capture_default_str();
    backtest->add_option("--seed", backtest_args.seed, "Random seed")->required();
    backtest->add_flag("--shuffle", backtest_args.shuffle,
                       "Shuffle each train+test union before splitting");
    backtest->add_option("--k-folds", backtest_args.folds, "NLS cross-validation folds")
        ->capture_default_str();
    backtest->add_flag("--nls-returns", backtest_args.nls_returns,
                       "Run NLS on raw returns instead of z-scores");
    backtest->add_option("--scale", backtest_args.scale,
                         "Metric scale (correlation|covariance)")
        ->capture_default_str();
    backtest->add_flag("--kl-natural", backtest_args.kl_natural,
                       "Report KL in nats instead of base n");
    backtest->add_option("--max-missing", backtest_args.max_missing,
                         "Max zero-or-missing fraction per asset in the train window")
        ->capture_default_str();
    backtest->add_option("--max-pair-corr", backtest_args.max_pair_corr,
                         "Duplicate-asset correlation threshold")
        ->capture_default_str();
    backtest->add_option("--workers", backtest_args.workers,
                         "Worker threads (0: COVKIT_WORKERS env or hardware)");
    backtest->callback([&] { std::exit(run_backtest_cmd(backtest_args)); });

    auto* diagnose = app.add_subcommand("diagnose", "Stationarity and separability diagnostics");
    diagnose->require_subcommand(1);

    EntropyArgs entropy_args;
    auto* entropy = diagnose->add_subcommand("entropy", "Rank-wise overlap entropy profile");
    entropy->add_option("--input", entropy_args.input, "Returns panel CSV")->required();
    entropy->add_option("--output", entropy_args.output, "Profile CSV")->capture_default_str();
    entropy->add_option("--cal-begin", entropy_args.cal_begin, "Range start (date or row)");
    entropy->add_option("--cal-end", entropy_args.cal_end, "Range end, exclusive (date or row)");
    entropy->add_option("--delta-train", entropy_args.delta_train, "Prev window length")
        ->capture_default_str();
    entropy->add_option("--delta", entropy_args.delta, "Next window length")->capture_default_str();
    entropy->add_option("--B,--samples", entropy_args.samples, "Window draws")->capture_default_str();
    entropy->add_option("--n", entropy_args.n, "Assets per draw")->capture_default_str();
    entropy->add_option("--seed", entropy_args.seed, "Random seed")->required();
    entropy->add_flag("--shuffle", entropy_args.shuffle,
                      "Also emit the shuffled profile and the paired difference");
    entropy->add_option("--bootstrap", entropy_args.bootstrap, "Bootstrap resamples for the bands")
        ->capture_default_str();
    entropy->add_option("--workers", entropy_args.workers, "Worker threads");
    entropy->callback([&] { std::exit(run_entropy(entropy_args)); });

    SeparabilityArgs separability_args;
    auto* separability = diagnose->add_subcommand(
        "separability", "Coupled vs factored average of overlap times next spectrum");
    separability->add_option("--input", separability_args.input, "Returns panel CSV")->required();
    separability->add_option("--output", separability_args.output, "Rank profile CSV")
        ->capture_default_str();
    separability->add_option("--cal-begin", separability_args.cal_begin, "Range start (date or row)");
    separability->add_option("--cal-end", separability_args.cal_end,
                             "Range end, exclusive (date or row)");
    separability->add_option("--delta-train", separability_args.delta_train, "Prev window length")
        ->capture_default_str();
    separability->add_option("--delta", separability_args.delta, "Next window length")
        ->capture_default_str();
    separability->add_option("--B,--samples", separability_args.samples, "Window draws")
        ->capture_default_str();
    separability->add_option("--n", separability_args.n, "Assets per draw")->capture_default_str();
    separability->add_option("--seed", separability_args.seed, "Random seed")->required();
    separability->add_option("--workers", separability_args.workers, "Worker threads");
    separability->callback([&] { std::exit(run_separability(separability_args)); });

    EigStabilityArgs eig_args;
    auto* eig_stability = diagnose->add_subcommand(
        "eig-stability", "Calibrated mean spectrum vs adjacent window as next-spectrum predictors");
    eig_stability->add_option("--input", eig_args.input, "Returns panel CSV")->required();
    eig_stability->add_option("--output", eig_args.output, "Per-draw differences CSV")
        ->capture_default_str();
    eig_stability->add_option("--cal-begin", eig_args.cal_begin, "Calibration start (date or row)");
    eig_stability->add_option("--cal-end", eig_args.cal_end,
                              "Calibration end, exclusive (default: half the panel)");
    eig_stability->add_option("--test-begin", eig_args.test_begin,
                              "Held-out start (default: half the panel)");
    eig_stability->add_option("--test-end", eig_args.test_end, "Held-out end, exclusive");
    eig_stability->add_option("--delta-train", eig_args.delta_train, "Prev window length")
        ->capture_default_str();
    eig_stability->add_option("--delta", eig_args.delta, "Next window length")->capture_default_str();
    eig_stability->add_option("--B,--samples", eig_args.samples, "Window draws per phase")
        ->capture_default_str();
    eig_stability->add_option("--n", eig_args.n, "Assets per draw")->capture_default_str();
    eig_stability->add_option("--seed", eig_args.seed, "Random seed")->required();
    eig_stability->add_option("--resamples", eig_args.resamples, "Bootstrap resamples for p-values")
        ->capture_default_str();
    eig_stability->add_option("--workers", eig_args.workers, "Worker threads");
    eig_stability->callback([&] { std::exit(run_eig_stability(eig_args)); });

    DeltaSweepArgs delta_args;
    auto* delta_sweep = diagnose->add_subcommand(
        "delta-sweep", "Calibrated eigenvalues as a function of the next window length");
    delta_sweep->add_option("--input", delta_args.input, "Returns panel CSV")->required();
    delta_sweep->add_option("--output", delta_args.output, "Long-format CSV")->capture_default_str();
    delta_sweep->add_option("--cal-begin", delta_args.cal_begin, "Range start (date or row)");
    delta_sweep->add_option("--cal-end", delta_args.cal_end, "Range end, exclusive (date or row)");
    delta_sweep->add_option("--delta-train", delta_args.delta_train, "Train window length")
        ->capture_default_str();
    delta_sweep->add_option("--delta", delta_args.deltas, "Next window lengths to sweep")
        ->required();
    delta_sweep->add_option("--B,--samples", delta_args.samples, "Bootstrap interval pairs")
        ->capture_default_str();
    delta_sweep->add_option("--n", delta_args.n, "Assets per sample")->capture_default_str();
    delta_sweep->add_option("--seed", delta_args.seed, "Random seed")->required();
    delta_sweep->add_option("--workers", delta_args.workers, "Worker threads");
    delta_sweep->callback([&] { std::exit(run_delta_sweep(delta_args)); });

    SynthBenchArgs sb_args;
    auto* synth_bench = diagnose->add_subcommand(
        "synth-bench", "Ordered vs shuffled overlap calibration on rotating synthetic data");
    synth_bench->add_option("--n", sb_args.n, "Dimension")->capture_default_str();
    synth_bench->add_option("--T,--records", sb_args.records, "Records per replication")
        ->capture_default_str();
    synth_bench->add_option("--delta-train", sb_args.delta_train, "Prev window length")
        ->capture_default_str();
    synth_bench->add_option("--delta-test", sb_args.delta_test, "Next/test window length")
        ->capture_default_str();
    synth_bench->add_option("--B,--samples", sb_args.samples, "Overlap draws per replication")
        ->capture_default_str();
    synth_bench->add_option("--replications", sb_args.replications, "Replications per s")
        ->capture_default_str();
    synth_bench->add_option("--s", sb_args.s_values, "Rotation angle sd values to sweep")
        ->required();
    synth_bench->add_option("--law", sb_args.law, "Factor law (normal|student-t)")
        ->capture_default_str();
    synth_bench->add_option("--nu", sb_args.nu, "Student-t degrees of freedom")
        ->capture_default_str();
    synth_bench->add_option("--lambda-min", sb_args.lambda_min, "Smallest true eigenvalue")
        ->capture_default_str();
    synth_bench->add_option("--lambda-ratio", sb_args.lambda_ratio, "Geometric ratio")
        ->capture_default_str();
    synth_bench->add_option("--seed", sb_args.seed, "Random seed")->required();
    synth_bench->add_option("--output", sb_args.output, "Summary CSV")->capture_default_str();
    synth_bench->add_option("--workers", sb_args.workers, "Worker threads");
    synth_bench->callback([&] { std::exit(run_synth_bench(sb_args)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const covkit::InfeasibleWindowError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const covkit::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const covkit::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return 0;
}
