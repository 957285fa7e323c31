#include "covkit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "covkit/errors.hpp"

namespace covkit {

std::string to_string(EstimatorId id) {
    switch (id) {
        case EstimatorId::sample: return "sample";
        case EstimatorId::oracle: return "oracle";
        case EstimatorId::average_oracle: return "average_oracle";
        case EstimatorId::nls_cv: return "nls_cv";
    }
    return "unknown";
}

EstimatorId estimator_from_string(const std::string& name) {
    if (name == "sample") return EstimatorId::sample;
    if (name == "oracle") return EstimatorId::oracle;
    if (name == "average_oracle" || name == "ao") return EstimatorId::average_oracle;
    if (name == "nls_cv" || name == "nls") return EstimatorId::nls_cv;
    throw DataError("unknown estimator: " + name);
}

double eigenvalue_floor(double trace, Eigen::Index n) {
    if (n <= 0) return 0.0;
    return 1e-12 * trace / static_cast<double>(n);
}

Vector floor_eigenvalues(Vector lambdas) {
    const double floor = eigenvalue_floor(lambdas.sum(), lambdas.size());
    for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
        lambdas(i) = std::max(lambdas(i), floor);
    }
    return lambdas;
}

Vector oracle_eigenvalues(const Eigen::Ref<const Matrix>& v_train,
                          const Eigen::Ref<const Matrix>& sigma_test) {
    if (v_train.rows() != sigma_test.rows() || v_train.cols() != sigma_test.cols() ||
        sigma_test.rows() != sigma_test.cols()) {
        throw DataError("oracle_eigenvalues: dimension mismatch");
    }
    const Eigen::Index n = v_train.cols();
    Vector lambdas(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        lambdas(k) = v_train.col(k).dot(sigma_test * v_train.col(k));
    }
    return lambdas;
}

FilteredCovariance apply_rie(const Eigen::Ref<const Matrix>& v_train, const Vector& lambdas,
                             EstimatorId id, const WindowDescriptor& provenance) {
    if (v_train.rows() != v_train.cols() || lambdas.size() != v_train.cols()) {
        throw DataError("apply_rie: dimension mismatch");
    }
    const double floor = eigenvalue_floor(lambdas.sum(), lambdas.size());
    if (lambdas.minCoeff() < -std::abs(floor)) {
        throw NumericError("apply_rie: eigenvalue below the admissible floor: " +
                           std::to_string(lambdas.minCoeff()));
    }
    Matrix xi = v_train * lambdas.asDiagonal() * v_train.transpose();
    xi = ((xi + xi.transpose()) * 0.5).eval();
    return FilteredCovariance{std::move(xi), id, provenance};
}

double oracle_optimality_gap(const Eigen::Ref<const Matrix>& v_train,
                             const Eigen::Ref<const Matrix>& sigma_test, const Vector& trial) {
    // In the v_train basis, ||Xi(L) - Sigma||_F^2 splits into the diagonal
    // residual sum (L_k - m_kk)^2 plus the fixed off-diagonal mass; the
    // oracle zeroes the first term.
    Matrix rotated = v_train.transpose() * sigma_test * v_train;
    if (trial.size() != rotated.rows()) {
        throw DataError("oracle_optimality_gap: trial length mismatch");
    }
    double off_mass = 0.0;
    double diag_residual = 0.0;
    for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
        for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
            if (i == j) continue;
            off_mass += rotated(i, j) * rotated(i, j);
        }
        double d = trial(i) - rotated(i, i);
        diag_residual += d * d;
    }
    return std::sqrt(diag_residual + off_mass) - std::sqrt(off_mass);
}

Vector nls_cv_eigenvalues(const Eigen::Ref<const Matrix>& x_train, int folds) {
    const Eigen::Index t = x_train.rows();
    const Eigen::Index n = x_train.cols();
    if (folds < 2) throw DataError("nls_cv_eigenvalues: need at least 2 folds");
    if (t < 2 * folds) {
        throw DataError("nls_cv_eigenvalues: " + std::to_string(t) + " rows cannot host " +
                        std::to_string(folds) + " folds of >= 2 rows");
    }

    // Contiguous folds preserving time order; fold f covers [bounds[f], bounds[f+1]).
    std::vector<Eigen::Index> bounds(static_cast<std::size_t>(folds) + 1);
    for (int f = 0; f <= folds; ++f) {
        bounds[static_cast<std::size_t>(f)] = t * f / folds;
    }

    Vector mean = Vector::Zero(n);
    for (int f = 0; f < folds; ++f) {
        const Eigen::Index fb = bounds[static_cast<std::size_t>(f)];
        const Eigen::Index fe = bounds[static_cast<std::size_t>(f) + 1];
        const Eigen::Index fold_rows = fe - fb;

        Matrix complement(t - fold_rows, n);
        complement.topRows(fb) = x_train.topRows(fb);
        complement.bottomRows(t - fe) = x_train.bottomRows(t - fe);

        EigenSystem basis = eigendecompose(sample_covariance(complement));
        Matrix fold_cov = sample_covariance(x_train.middleRows(fb, fold_rows));
        mean += oracle_eigenvalues(basis.eigenvectors, fold_cov);
    }
    mean /= static_cast<double>(folds);

    Vector out = floor_eigenvalues(std::move(mean));
    std::sort(out.data(), out.data() + out.size());
    return out;
}

FilteredCovariance rescale_to_covariance(const FilteredCovariance& filtered_corr,
                                         const Vector& train_variances) {
    const Eigen::Index n = filtered_corr.matrix.rows();
    if (train_variances.size() != n) {
        throw DataError("rescale_to_covariance: variance vector length mismatch");
    }
    if (train_variances.minCoeff() <= 0.0) {
        throw DataError("rescale_to_covariance: variances must be strictly positive");
    }
    Vector sd = train_variances.array().sqrt();
    FilteredCovariance out = filtered_corr;
    out.matrix = sd.asDiagonal() * filtered_corr.matrix * sd.asDiagonal();
    return out;
}

} // namespace covkit
