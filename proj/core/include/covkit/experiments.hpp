#pragma once

#include <cstdint>
#include <vector>

#include "covkit/calibration.hpp"
#include "covkit/panel.hpp"
#include "covkit/synth.hpp"

namespace covkit {

/// Rotating-basis benchmark: per replication, calibrate the average squared
/// overlap twice (time-ordered and locally shuffled), map the true spectrum
/// through each, and score both stationary estimators against the held-out
/// test covariance. Reports Frobenius(ordered) - Frobenius(shuffled) per s.
struct SynthBenchConfig {
    int n = 10;
    long record_count = 10000;
    int delta_train = 50;
    int delta_test = 50;
    std::uint64_t overlap_samples = 2000;  // interval pairs per replication
    int replications = 200;
    std::vector<double> rotation_sds{0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 1.0};
    FactorLaw law = FactorLaw::normal;
    double student_dof = 5.0;
    double lambda_min = 1.0;
    double lambda_ratio = 1.5;
    std::uint64_t seed = 0;
    int workers = 0;
};

struct SynthBenchPoint {
    double rotation_sd = 0.0;
    double mean_gap = 0.0;   // mean Frobenius difference, negative = ordered wins
    double std_error = 0.0;
    std::vector<double> gaps;  // per replication; replication r is seeded by
                               // (seed, s, r) so runs with different factor
                               // laws pair rep-by-rep
};

std::vector<SynthBenchPoint> run_synth_benchmark(const SynthBenchConfig& config);

/// Rank-wise mean overlap entropy over bootstrap draws, time-ordered vs
/// locally shuffled, with 95% bootstrap bands. diff_* rows are paired
/// (ordered - shuffled on the same draw).
struct EntropyExperimentResult {
    Vector ordered_mean, ordered_lo, ordered_hi;
    Vector shuffled_mean, shuffled_lo, shuffled_hi;
    Vector diff_mean, diff_lo, diff_hi;
    std::uint64_t samples = 0;
    bool bands_defined = false;  // false when samples == 1
};

EntropyExperimentResult entropy_experiment(const ReturnsPanel& panel, const IndexRange& calibration,
                                           std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                           std::uint64_t samples, int n, std::uint64_t seed,
                                           const CalibrationOptions& options = {},
                                           int bootstrap_resamples = 1000);

/// Compare two predictors of the next-window spectrum on held-out windows:
/// the calibrated rank-wise mean <lambda_next> against the adjacent
/// lambda_prev. Emits the per-draw deviation differences D(<next>) - D(prev)
/// under L1 and L2 with one-sided bootstrap p-values for the mean's sign.
struct EigStabilityResult {
    Vector mean_lambda_next;
    std::vector<double> l1_diff, l2_diff;
    double l1_mean = 0.0, l2_mean = 0.0;
    double l1_p_value = 1.0, l2_p_value = 1.0;
    std::uint64_t bootstrap_resamples = 0;
    bool degenerate = false;  // single-sample distributions
};

EigStabilityResult eigenvalue_stability_experiment(const ReturnsPanel& panel,
                                                   const IndexRange& calibration,
                                                   const IndexRange& test, std::ptrdiff_t delta_train,
                                                   std::ptrdiff_t delta, std::uint64_t samples, int n,
                                                   std::uint64_t seed,
                                                   const CalibrationOptions& options = {},
                                                   int bootstrap_resamples = 10000);

/// Wrap a generated path in the standard panel container (synthetic calendar
/// dates, full presence).
ReturnsPanel panel_from_synth(const SynthPath& path, const std::string& start_date = "2000-01-03");

} // namespace covkit
