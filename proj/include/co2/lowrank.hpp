#pragma once

#include "co2/common.hpp"

#include <functional>

namespace co2 {

// Apply-to-block access to a symmetric PSD operator, so dense Gram matrices
// and transport-plan operators share one factorization path.
struct MatrixHandle {
    Index n = 0;
    std::function<Matrix(const Matrix&)> apply;
};

MatrixHandle dense_handle(const Matrix& A);

// Rank-r eigenpair factorization from a Gaussian range sketch.
struct PsdFactor {
    Matrix U;        // n x r, orthonormal columns
    Vector lambda;   // nonincreasing, >= 0
    Index rank = 0;
    Index sketch_width = 0;
    double nu_shift = 0.0;
};

// Sketch, shift by nu = eps_mach * |Y|_2, Cholesky of the sketch Gram, thin
// SVD, truncate, subtract the shift back (floored at 0). sketch_width > n is
// clamped to n with a warning on stderr. Cholesky failure means the input was
// numerically indefinite; the error suggests a larger stabilization shift.
PsdFactor nystrom(const MatrixHandle& A, Index r, Index sketch_width, std::uint64_t seed);

// values[i] = sum of eigenvalues after the i-th largest, i = 0..n; values[0]
// is the trace and values[n] = 0. Negative roundoff eigenvalues are floored.
struct TailSum {
    Vector values;
    Vector spectrum;  // nonincreasing
};

TailSum tail_sum(const Matrix& K_over_n);

}  // namespace co2
