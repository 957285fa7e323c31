#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covkit/estimators.hpp"
#include "covkit/linalg.hpp"
#include "covkit/panel.hpp"

namespace covkit {

enum class AssetSamplingMode : std::uint8_t { fixed_set = 0, random_subsets = 1 };

std::string to_string(AssetSamplingMode mode);

/// Knobs shared by every bootstrap-pair consumer.
struct CalibrationOptions {
    double max_missing_frac = 0.20;  // train-window zero-or-missing fraction
    double max_pair_corr = 0.95;     // train-window duplicate-asset threshold
    int retry_cap = 100;             // re-draws per bootstrap slot before giving up
    bool shuffle = false;            // permute each prev+next union before splitting
    AssetSamplingMode mode = AssetSamplingMode::random_subsets;
    int workers = 0;                 // 0: resolve from COVKIT_WORKERS / hardware
};

/// Persisted rank-wise mean of bootstrap oracle eigenvalues, keyed by the
/// sampling geometry that produced it.
struct AOCalibration {
    Vector lambdas;
    int n = 0;
    int delta_train = 0;
    int delta = 0;
    std::uint64_t samples = 0;  // B
    AssetSamplingMode mode = AssetSamplingMode::random_subsets;
    std::uint64_t seed = 0;
    std::int64_t range_begin_row = 0;
    std::int64_t range_end_row = 0;
    std::string range_begin_date;
    std::string range_end_date;
    std::optional<Matrix> average_overlap;  // optional n x n payload

    bool operator==(const AOCalibration& other) const;
};

/// One admissible bootstrap draw: consecutive windows plus an asset subset
/// that passed the train-window filters, standardized per window. The raw
/// (pre-standardization) union rows are kept so that experiments can apply
/// their own shuffling; they reflect the split actually used (prev rows
/// first, next rows after).
struct PairDraw {
    IntervalPair window;
    std::vector<int> assets;
    Matrix prev_std;
    Matrix next_std;
    Matrix union_values;
    BoolMatrix union_mask;
};

/// Draw the sample for bootstrap slot `index`, re-drawing up to
/// options.retry_cap times when the filters leave fewer than n eligible
/// assets or a window has a degenerate column. Deterministic in
/// (panel, seed, index) regardless of the calling thread.
PairDraw draw_pair_sample(const ReturnsPanel& panel, const IndexRange& calibration,
                          std::ptrdiff_t delta_train, std::ptrdiff_t delta, int n,
                          std::uint64_t seed, std::uint64_t index,
                          const CalibrationOptions& options);

/// Rank-wise mean of oracle eigenvalues over `samples` bootstrap interval
/// pairs drawn from the calibration range.
AOCalibration calibrate_ao(const ReturnsPanel& panel, const IndexRange& calibration,
                           std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                           std::uint64_t samples, int n, std::uint64_t seed,
                           const CalibrationOptions& options = {});

/// Replace the spectrum of the train correlation matrix with the calibrated
/// eigenvalues; x_train_std must be the standardized train window.
FilteredCovariance apply_ao(const AOCalibration& calibration,
                            const Eigen::Ref<const Matrix>& x_train_std,
                            const WindowDescriptor& provenance = {});

/// Element-wise mean squared-overlap between consecutive-window eigenbases.
Matrix average_overlap(const ReturnsPanel& panel, const IndexRange& calibration,
                       std::ptrdiff_t delta_train, std::ptrdiff_t delta, std::uint64_t samples,
                       int n, std::uint64_t seed, const CalibrationOptions& options = {});

/// Both sides of the separability approximation: the coupled mean
/// <H^2 lambda_next> against the factored <H^2><lambda_next>.
struct SeparabilityDiagnostic {
    Vector coupled;
    Vector factored;
    double correlation = 0.0;
    double max_relative_deviation = 0.0;
};

SeparabilityDiagnostic separability_diagnostic(const ReturnsPanel& panel,
                                               const IndexRange& calibration,
                                               std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                               std::uint64_t samples, int n, std::uint64_t seed,
                                               const CalibrationOptions& options = {});

/// Versioned, checksummed calibration file; byte layout in docs/formats.md.
/// load(save(c)) == c bit-exactly.
void save_calibration(const AOCalibration& calibration, const std::string& path);
AOCalibration load_calibration(const std::string& path);

} // namespace covkit
