#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "covkit/linalg.hpp"

namespace covkit {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Half-open row range [begin, end).
struct IndexRange {
    std::ptrdiff_t begin = 0;
    std::ptrdiff_t end = 0;

    std::ptrdiff_t length() const { return end - begin; }
    bool contains(const IndexRange& inner) const {
        return inner.begin >= begin && inner.end <= end && inner.begin <= inner.end;
    }
};

/// Two consecutive windows: prev of length delta_train followed immediately
/// by next of length delta.
struct IntervalPair {
    IndexRange prev;
    IndexRange next;

    std::ptrdiff_t split() const { return prev.end; }
};

/// Dated T x N matrix of simple returns. Missing cells hold 0.0 in `values`
/// and false in `present`. Dates are ISO-8601 and strictly increasing.
struct ReturnsPanel {
    std::vector<std::string> dates;
    std::vector<std::string> assets;
    Matrix values;
    BoolMatrix present;

    std::ptrdiff_t rows() const { return values.rows(); }
    std::ptrdiff_t cols() const { return values.cols(); }

    /// Row index of the first date >= iso_date; throws DataError if past the end.
    std::ptrdiff_t row_at_or_after(const std::string& iso_date) const;

    /// Values slice for a row range and a set of column indices.
    Matrix slice(const IndexRange& range, const std::vector<int>& columns) const;
    BoolMatrix mask_slice(const IndexRange& range, const std::vector<int>& columns) const;
};

/// Parse the panel CSV (header: date,asset1,asset2,...; empty cell = missing).
/// Rows are sorted by date; duplicate dates and ragged rows are errors.
ReturnsPanel load_panel(const std::string& path);

/// Parse panel CSV content from a string (same contract as load_panel).
ReturnsPanel parse_panel_csv(const std::string& content, const std::string& origin = "<string>");

/// Write a panel back to the standard CSV layout.
void save_panel(const ReturnsPanel& panel, const std::string& path);

/// `count` consecutive ISO calendar dates starting at `first` (used when
/// materializing synthetic panels).
std::vector<std::string> consecutive_dates(const std::string& first, std::size_t count);

/// Train-window asset selection: keep assets whose fraction of zero-or-missing
/// values in `train` is below max_missing_frac, then greedily drop the later
/// asset of every pair correlating above max_pair_corr in `train`.
/// Returns retained column indices in listing order.
std::vector<int> filter_assets(const ReturnsPanel& panel, const IndexRange& train,
                               double max_missing_frac, double max_pair_corr);

/// Column-wise standardization to mean 0, sd 1 (unbiased divisor) over present
/// values; missing cells become 0 afterwards. `labels` is used in error text.
Matrix standardize(const Eigen::Ref<const Matrix>& slice, const BoolMatrix& present,
                   const std::vector<std::string>& labels = {});
Matrix standardize(const Eigen::Ref<const Matrix>& slice,
                   const std::vector<std::string>& labels = {});

/// Uniform random permutation of [0, count) for the given seed; the row
/// order used by shuffle_pair.
std::vector<std::size_t> shuffle_permutation(std::size_t count, std::uint64_t seed);

/// Permute the rows of the prev+next union uniformly at random (seeded) and
/// re-split into blocks of delta_train and delta rows.
std::pair<Matrix, Matrix> shuffle_pair(const Eigen::Ref<const Matrix>& union_slice,
                                       std::uint64_t seed, std::ptrdiff_t delta_train,
                                       std::ptrdiff_t delta);

/// Draw B interval pairs (with replacement) whose prev/next windows fit in
/// `calibration`. Throws InfeasibleWindowError if the range is too short.
std::vector<IntervalPair> sample_interval_pairs(const IndexRange& calibration,
                                                std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                                std::size_t count, std::uint64_t seed);

} // namespace covkit
