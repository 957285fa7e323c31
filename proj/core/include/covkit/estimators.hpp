#pragma once

#include <string>

#include "covkit/linalg.hpp"

namespace covkit {

enum class EstimatorId { sample, oracle, average_oracle, nls_cv };

std::string to_string(EstimatorId id);
EstimatorId estimator_from_string(const std::string& name);

/// Where a filtered matrix came from: the train window and, for the
/// look-ahead oracle, the test window it peeked at.
struct WindowDescriptor {
    std::ptrdiff_t train_begin = 0;
    std::ptrdiff_t train_end = 0;
    std::ptrdiff_t test_begin = 0;
    std::ptrdiff_t test_end = 0;
};

struct FilteredCovariance {
    Matrix matrix;
    EstimatorId id = EstimatorId::sample;
    WindowDescriptor provenance;
};

/// Smallest admissible eigenvalue for a spectrum with the given total mass:
/// 1e-12 * trace / n. Keeps every filtered matrix invertible for portfolio
/// weights.
double eigenvalue_floor(double trace, Eigen::Index n);

/// Clip a spectrum at its eigenvalue floor (no-op when already above it).
Vector floor_eigenvalues(Vector lambdas);

/// Best-in-Frobenius replacement eigenvalues for the basis v_train given the
/// realized matrix: lambda_k = v_k' Sigma_test v_k. The sum equals
/// trace(Sigma_test) up to round-off.
Vector oracle_eigenvalues(const Eigen::Ref<const Matrix>& v_train,
                          const Eigen::Ref<const Matrix>& sigma_test);

/// Rotationally invariant estimator: keep the basis, substitute the spectrum.
FilteredCovariance apply_rie(const Eigen::Ref<const Matrix>& v_train, const Vector& lambdas,
                             EstimatorId id = EstimatorId::sample,
                             const WindowDescriptor& provenance = {});

/// Frobenius-distance excess of a trial spectrum over the oracle one:
/// ||Xi(trial) - Sigma_test||_F - ||Xi(oracle) - Sigma_test||_F, >= 0 up to
/// round-off for every trial.
double oracle_optimality_gap(const Eigen::Ref<const Matrix>& v_train,
                             const Eigen::Ref<const Matrix>& sigma_test, const Vector& trial);

/// Non-linear shrinkage of the spectrum via k-fold cross-validated oracle
/// averaging inside the train window: contiguous folds, oracle eigenvalues of
/// each fold against the complement's eigenbasis, rank-wise mean, floored and
/// re-sorted ascending.
Vector nls_cv_eigenvalues(const Eigen::Ref<const Matrix>& x_train, int folds = 10);

/// Scale a filtered correlation matrix back to covariance:
/// out_ij = sd_i * in_ij * sd_j with sd = sqrt(train variances).
FilteredCovariance rescale_to_covariance(const FilteredCovariance& filtered_corr,
                                         const Vector& train_variances);

} // namespace covkit
