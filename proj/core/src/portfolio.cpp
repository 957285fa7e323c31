#include "covkit/portfolio.hpp"

#include <cmath>

#include "covkit/errors.hpp"

namespace covkit {

PortfolioWeights gmv_weights(const Eigen::Ref<const Matrix>& sigma) {
    EigenSystem es = eigendecompose(sigma);
    const Eigen::Index n = es.dim();

    const double floor = eigenvalue_floor(es.eigenvalues.sum(), n);
    if (!(floor > 0.0)) {
        throw NumericError("gmv_weights: matrix trace is not positive");
    }

    Vector ones = Vector::Ones(n);
    Vector projected = es.eigenvectors.transpose() * ones;
    for (Eigen::Index k = 0; k < n; ++k) {
        projected(k) /= std::max(es.eigenvalues(k), floor);
    }
    Vector unnormalized = es.eigenvectors * projected;

    const double budget = unnormalized.sum();
    if (budget == 0.0 || !std::isfinite(budget)) {
        throw NumericError("gmv_weights: singular budget normalization");
    }
    return PortfolioWeights{unnormalized / budget};
}

PortfolioWeights gmv_weights(const FilteredCovariance& sigma) {
    return gmv_weights(sigma.matrix);
}

double realized_volatility(const PortfolioWeights& w, const Eigen::Ref<const Matrix>& sigma_test) {
    if (w.weights.size() != sigma_test.rows() || sigma_test.rows() != sigma_test.cols()) {
        throw DataError("realized_volatility: dimension mismatch");
    }
    double variance = w.weights.dot(sigma_test * w.weights);
    return std::sqrt(std::max(variance, 0.0));
}

} // namespace covkit
