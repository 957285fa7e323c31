#pragma once

#include <Eigen/Dense>

namespace covkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Spectral decomposition of a symmetric matrix. Eigenvalues ascending,
/// eigenvector column k paired with eigenvalue k, deterministic sign
/// convention (largest-magnitude entry of each column is positive).
struct EigenSystem {
    Vector eigenvalues;
    Matrix eigenvectors;

    int dim() const { return static_cast<int>(eigenvalues.size()); }
    Matrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    }
};

bool is_symmetric(const Eigen::Ref<const Matrix>& a, double tol = 1e-12);

/// Unbiased sample covariance (1/(T-1)) X'X of the column-demeaned data.
/// On standardized input this is the sample correlation matrix.
Matrix sample_covariance(const Eigen::Ref<const Matrix>& x);

/// Symmetric eigendecomposition with the fixed ordering and sign convention.
/// Throws NumericError with condition diagnostics if the solver fails.
EigenSystem eigendecompose(const Eigen::Ref<const Matrix>& a);

/// Element-wise squared rotation (V_prev' V_next) between two orthonormal
/// bases; doubly stochastic up to round-off.
Matrix overlap(const Eigen::Ref<const Matrix>& v_prev, const Eigen::Ref<const Matrix>& v_next);

/// Smallest gap between consecutive (ascending) eigenvalues; a gap below
/// ~1e-10 means the ordering inside the degenerate subspace is arbitrary.
double min_eigen_gap(const Vector& ascending_eigenvalues);

} // namespace covkit
