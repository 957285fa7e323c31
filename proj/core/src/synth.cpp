#include "covkit/synth.hpp"

#include <cmath>
#include <random>

#include "covkit/errors.hpp"
#include "covkit/rng.hpp"

namespace covkit {

namespace {

// Right-multiply m by the plane rotation G(i, j, angle), the n-dimensional
// embedding of [[cos, -sin], [sin, cos]] in coordinates (i, j).
void apply_plane_rotation_right(Matrix& m, Eigen::Index i, Eigen::Index j, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Vector col_i = m.col(i);
    m.col(i) = c * col_i + s * m.col(j);
    m.col(j) = -s * col_i + c * m.col(j);
}

void validate(const SynthConfig& config) {
    if (config.n < 2) throw DataError("synth: need n >= 2");
    if (config.record_count < 2) throw DataError("synth: need at least 2 records");
    if (config.rotation_sd < 0.0) throw DataError("synth: rotation sd must be >= 0");
    if (config.lambda_min <= 0.0 || config.lambda_ratio < 1.0) {
        throw DataError("synth: eigenvalue progression needs lambda_min > 0 and ratio >= 1");
    }
    if (config.law == FactorLaw::student_t && !(config.student_dof > 2.0)) {
        throw DataError("synth: Student-t factors need dof > 2 for a finite variance");
    }
}

} // namespace

const Matrix& SynthPath::basis_at(long t) const {
    for (std::size_t i = 0; i < basis_times.size(); ++i) {
        if (basis_times[i] == t) return bases[i];
    }
    throw DataError("SynthPath: basis at t=" + std::to_string(t) + " was not materialized");
}

Matrix euler_rotation(const Vector& angles, int n) {
    const Eigen::Index expected = static_cast<Eigen::Index>(n) * (n - 1) / 2;
    if (angles.size() != expected) {
        throw DataError("euler_rotation: expected " + std::to_string(expected) + " angles, got " +
                        std::to_string(angles.size()));
    }
    Matrix h = Matrix::Identity(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            apply_plane_rotation_right(h, i, j, angles(k++));
        }
    }
    return h;
}

Matrix haar_rotation(int n, std::uint64_t seed) {
    auto eng = rng::engine(seed, {rng::stream::synth_basis});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = gauss(eng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the QR gauge so the draw is Haar, then land in SO(n).
    for (Eigen::Index k = 0; k < n; ++k) {
        if (r(k, k) < 0.0) q.col(k) = -q.col(k);
    }
    if (q.determinant() < 0.0) q.col(n - 1) = -q.col(n - 1);
    return q;
}

SynthPath generate(const SynthConfig& config) {
    validate(config);
    const int n = config.n;
    const long t_count = config.record_count;

    SynthPath path;
    path.lambda_true.resize(n);
    for (int k = 0; k < n; ++k) {
        path.lambda_true(k) = config.lambda_min * std::pow(config.lambda_ratio, k);
    }
    Vector sqrt_lambda = path.lambda_true.array().sqrt();

    long stride = config.basis_stride;
    if (stride <= 0) stride = n <= 50 ? 1 : 100;

    auto eng_basis = rng::engine(config.seed, {rng::stream::synth_basis, 1});
    auto eng_factors = rng::engine(config.seed, {rng::stream::synth_factors});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::normal_distribution<double> angle_dist(0.0, config.rotation_sd);
    std::student_t_distribution<double> student(config.law == FactorLaw::student_t
                                                    ? config.student_dof
                                                    : 3.0);
    const double student_scale = config.law == FactorLaw::student_t
                                     ? std::sqrt((config.student_dof - 2.0) / config.student_dof)
                                     : 1.0;

    Matrix v = haar_rotation(n, config.seed);
    path.data.resize(t_count, n);

    Vector factors(n);
    for (long t = 0; t < t_count; ++t) {
        if (t % stride == 0 || t == t_count - 1) {
            path.basis_times.push_back(t);
            path.bases.push_back(v);
        }

        for (int k = 0; k < n; ++k) {
            double a = config.law == FactorLaw::normal ? gauss(eng_factors)
                                                       : student(eng_factors) * student_scale;
            factors(k) = a * sqrt_lambda(k);
        }
        path.data.row(t) = (v * factors).transpose();

        if (t + 1 < t_count && config.rotation_sd > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    apply_plane_rotation_right(v, i, j, angle_dist(eng_basis));
                }
            }
        }
    }
    return path;
}

Vector ao_from_true(const Eigen::Ref<const Matrix>& avg_overlap, const Vector& lambda_true) {
    if (avg_overlap.rows() != avg_overlap.cols() || avg_overlap.rows() != lambda_true.size()) {
        throw DataError("ao_from_true: dimension mismatch");
    }
    return avg_overlap * lambda_true;
}

} // namespace covkit
