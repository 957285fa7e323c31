#include "covkit/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "covkit/errors.hpp"

namespace covkit {

bool is_symmetric(const Eigen::Ref<const Matrix>& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
            double scale = std::max(1.0, std::abs(a(i, j)));
            if (std::abs(a(i, j) - a(j, i)) > tol * scale) return false;
        }
    }
    return true;
}

Matrix sample_covariance(const Eigen::Ref<const Matrix>& x) {
    const Eigen::Index t = x.rows();
    if (t < 2) throw DataError("sample_covariance: need at least 2 observations");
    Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(t - 1);
    // force exact symmetry against round-off in the GEMM
    return ((cov + cov.transpose()) * 0.5).eval();
}

EigenSystem eigendecompose(const Eigen::Ref<const Matrix>& a) {
    if (a.rows() != a.cols()) throw DataError("eigendecompose: matrix is not square");
    if (!is_symmetric(a)) throw DataError("eigendecompose: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "eigendecompose: solver did not converge (dim=" << a.rows()
            << ", norm=" << a.norm() << ", diag range=[" << a.diagonal().minCoeff()
            << ", " << a.diagonal().maxCoeff() << "])";
        throw NumericError(msg.str());
    }

    EigenSystem es{solver.eigenvalues(), solver.eigenvectors()};

    // Sign convention: the entry of largest absolute value in each column is
    // made positive; ties resolved by lowest row index.
    const Eigen::Index n = es.eigenvectors.cols();
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index pivot = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = std::abs(es.eigenvectors(i, k));
            if (v > best) {  // strict: ties keep the lowest index
                best = v;
                pivot = i;
            }
        }
        if (es.eigenvectors(pivot, k) < 0.0) es.eigenvectors.col(k) = -es.eigenvectors.col(k);
    }
    return es;
}

Matrix overlap(const Eigen::Ref<const Matrix>& v_prev, const Eigen::Ref<const Matrix>& v_next) {
    if (v_prev.rows() != v_next.rows() || v_prev.cols() != v_next.cols() ||
        v_prev.rows() != v_prev.cols()) {
        throw DataError("overlap: eigenvector bases must be square and of equal dimension");
    }
    Matrix h = v_prev.transpose() * v_next;
    return h.array().square().matrix();
}

double min_eigen_gap(const Vector& ascending_eigenvalues) {
    const Eigen::Index n = ascending_eigenvalues.size();
    if (n < 2) return std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 1; i < n; ++i) {
        gap = std::min(gap, ascending_eigenvalues(i) - ascending_eigenvalues(i - 1));
    }
    return gap;
}

} // namespace covkit
