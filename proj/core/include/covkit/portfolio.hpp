#pragma once

#include "covkit/estimators.hpp"
#include "covkit/linalg.hpp"

namespace covkit {

/// Budget-constrained weights; sum(w) == 1, signs unconstrained.
struct PortfolioWeights {
    Vector weights;
};

/// Global-minimum-variance weights Sigma^-1 1 / (1' Sigma^-1 1), solved
/// through the eigendecomposition with floored eigenvalues so that tiny
/// sample eigenvalues cannot blow up the solution.
PortfolioWeights gmv_weights(const Eigen::Ref<const Matrix>& sigma);
PortfolioWeights gmv_weights(const FilteredCovariance& sigma);

/// Realized volatility sqrt(w' Sigma_test w).
double realized_volatility(const PortfolioWeights& w, const Eigen::Ref<const Matrix>& sigma_test);

} // namespace covkit
