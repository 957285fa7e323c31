#pragma once

#include <optional>

#include "covkit/linalg.hpp"

namespace covkit {

/// sqrt of the summed squared element-wise differences.
double frobenius(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);

/// Gaussian KL divergence KL(test || est) in closed form. Returns nullopt
/// (skip) when either matrix is not strictly positive definite. When base_n
/// is set the value is reported in base n (divided by ln n).
std::optional<double> kl_divergence(const Eigen::Ref<const Matrix>& sigma_test,
                                    const Eigen::Ref<const Matrix>& sigma_est,
                                    bool base_n = false);

/// Per-row Shannon entropy of a squared-overlap matrix, normalized by log n
/// so that a perfect overlap scores 0 and a uniform row scores 1.
Vector overlap_entropy(const Eigen::Ref<const Matrix>& squared_overlap);

enum class DeviationNorm { l1, l2 };

/// Rank-paired L1 or L2 deviation between two spectra.
double eigenvalue_deviation(const Vector& lhs, const Vector& rhs, DeviationNorm norm);

} // namespace covkit
