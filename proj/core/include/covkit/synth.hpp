#pragma once

#include <cstdint>
#include <vector>

#include "covkit/linalg.hpp"

namespace covkit {

enum class FactorLaw { normal, student_t };

/// Factor model with a fixed geometric spectrum and an eigenbasis that
/// rotates by a random Euler-angle product at every step.
struct SynthConfig {
    int n = 10;
    long record_count = 10000;       // T
    double rotation_sd = 0.0;        // s: per-step angle standard deviation (radians)
    double lambda_min = 1.0;         // smallest true eigenvalue
    double lambda_ratio = 1.5;       // geometric progression ratio
    FactorLaw law = FactorLaw::normal;
    double student_dof = 5.0;        // nu, used when law == student_t; must be > 2
    std::uint64_t seed = 0;
    long basis_stride = 0;           // 0 = auto; how often V_t is materialized
};

struct SynthPath {
    Matrix data;                     // T x n rows X_t
    Vector lambda_true;              // ascending
    std::vector<long> basis_times;   // always contains 0 and T-1
    std::vector<Matrix> bases;       // V_t at basis_times

    const Matrix& basis_at(long t) const;
};

/// Product of elementary plane rotations, one per coordinate pair in
/// lexicographic order (0,1),(0,2),...,(n-2,n-1). n(n-1)/2 angles.
Matrix euler_rotation(const Vector& angles, int n);

/// Uniform (Haar) rotation matrix, det +1.
Matrix haar_rotation(int n, std::uint64_t seed);

SynthPath generate(const SynthConfig& config);

/// Predicted stationary spectrum under a known average squared overlap:
/// avg_overlap * lambda_true. Total mass is preserved because the overlap is
/// doubly stochastic.
Vector ao_from_true(const Eigen::Ref<const Matrix>& avg_overlap, const Vector& lambda_true);

} // namespace covkit
