#include "covkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "covkit/errors.hpp"
#include "covkit/estimators.hpp"

namespace covkit {

double frobenius(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DataError("frobenius: dimension mismatch");
    }
    return (a - b).norm();
}

std::optional<double> kl_divergence(const Eigen::Ref<const Matrix>& sigma_test,
                                    const Eigen::Ref<const Matrix>& sigma_est, bool base_n) {
    if (sigma_test.rows() != sigma_est.rows() || sigma_test.cols() != sigma_est.cols()) {
        throw DataError("kl_divergence: dimension mismatch");
    }
    const Eigen::Index n = sigma_test.rows();

    EigenSystem test = eigendecompose(sigma_test);
    EigenSystem est = eigendecompose(sigma_est);

    // Strict positive definiteness gate; degenerate realized matrices are
    // skipped rather than scored.
    if (test.eigenvalues.minCoeff() <= eigenvalue_floor(test.eigenvalues.sum(), n) ||
        est.eigenvalues.minCoeff() <= eigenvalue_floor(est.eigenvalues.sum(), n)) {
        return std::nullopt;
    }

    // tr(est^-1 test) through the eigendecomposition of the estimate.
    double trace_term = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        trace_term += est.eigenvectors.col(k).dot(sigma_test * est.eigenvectors.col(k)) /
                      est.eigenvalues(k);
    }

    double logdet_test = test.eigenvalues.array().log().sum();
    double logdet_est = est.eigenvalues.array().log().sum();

    double kl = 0.5 * (trace_term - static_cast<double>(n) + logdet_est - logdet_test);
    if (base_n) kl /= std::log(static_cast<double>(n));
    return kl;
}

Vector overlap_entropy(const Eigen::Ref<const Matrix>& squared_overlap) {
    const Eigen::Index n = squared_overlap.rows();
    if (squared_overlap.cols() != n) throw DataError("overlap_entropy: matrix must be square");
    if (n < 2) throw DataError("overlap_entropy: need dimension >= 2");

    const double log_n = std::log(static_cast<double>(n));
    Vector entropy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row_sum = squared_overlap.row(i).sum();
        if (std::abs(row_sum - 1.0) > 1e-6) {
            throw DataError("overlap_entropy: row " + std::to_string(i) + " sums to " +
                            std::to_string(row_sum) + ", not 1");
        }
        double e = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            double p = squared_overlap(i, j);
            if (p > 0.0) e -= p * std::log(p);  // 0 log 0 = 0
        }
        entropy(i) = std::clamp(e / log_n, 0.0, 1.0);
    }
    return entropy;
}

double eigenvalue_deviation(const Vector& lhs, const Vector& rhs, DeviationNorm norm) {
    if (lhs.size() != rhs.size()) throw DataError("eigenvalue_deviation: length mismatch");
    switch (norm) {
        case DeviationNorm::l1: return (lhs - rhs).lpNorm<1>();
        case DeviationNorm::l2: return (lhs - rhs).norm();
    }
    throw DataError("eigenvalue_deviation: unknown norm");
}

} // namespace covkit
