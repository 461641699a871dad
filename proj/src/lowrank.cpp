#include "co2/lowrank.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

namespace co2 {

MatrixHandle dense_handle(const Matrix& A) {
    if (A.rows() != A.cols()) {
        throw std::runtime_error("dense_handle: matrix must be square");
    }
    MatrixHandle h;
    h.n = A.rows();
    // References A; the matrix must outlive the handle.
    h.apply = [&A](const Matrix& X) { return Matrix(A * X); };
    return h;
}

PsdFactor nystrom(const MatrixHandle& A, Index r, Index sketch_width, std::uint64_t seed) {
    if (!A.apply || A.n <= 0) {
        throw std::runtime_error("nystrom: operator is empty");
    }
    if (r < 1) {
        throw UsageError("nystrom: rank must be at least 1");
    }
    if (sketch_width < 1) {
        throw UsageError("nystrom: sketch width must be at least 1");
    }
    const Index n = A.n;
    if (sketch_width > n) {
        std::cerr << "warning: sketch width " << sketch_width << " exceeds operator size "
                  << n << ", clamping to " << n << "\n";
        sketch_width = n;
    }
    if (r > sketch_width) {
        r = sketch_width;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix omega(n, sketch_width);
    for (Index j = 0; j < sketch_width; ++j) {
        for (Index i = 0; i < n; ++i) {
            omega(i, j) = gauss(rng);
        }
    }
    Eigen::HouseholderQR<Matrix> qr(omega);
    omega = qr.householderQ() * Matrix::Identity(n, sketch_width);

    Matrix y = A.apply(omega);

    // Shift by nu = eps_mach * |Y|_2 so the sketch Gram stays positive
    // definite; the shift is subtracted from the eigenvalues afterwards.
    Eigen::JacobiSVD<Matrix> norm_svd(y);
    const double nu = std::numeric_limits<double>::epsilon() * norm_svd.singularValues()(0);
    y += nu * omega;

    Matrix b = omega.transpose() * y;
    Matrix b_sym = 0.5 * (b + b.transpose());
    Eigen::LLT<Matrix> llt(b_sym);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error(
            "nystrom: Cholesky of the sketch Gram failed; the operator is numerically "
            "indefinite and needs a larger stabilization shift");
    }

    // M = Y L^{-T} has the same column space as Y and Gram M M^T close to the
    // projected operator; its singular values squared, minus nu, estimate the
    // eigenvalues.
    Matrix m = llt.matrixL().solve(y.transpose()).transpose();
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);

    PsdFactor f;
    f.sketch_width = sketch_width;
    f.nu_shift = nu;
    f.rank = r;
    f.U = svd.matrixU().leftCols(r);
    f.lambda = (svd.singularValues().head(r).array().square() - nu).max(0.0).matrix();
    return f;
}

TailSum tail_sum(const Matrix& K_over_n) {
    if (K_over_n.rows() != K_over_n.cols()) {
        throw std::runtime_error("tail_sum: matrix must be square");
    }
    const Index n = K_over_n.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(K_over_n);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("tail_sum: eigendecomposition failed");
    }
    TailSum t;
    t.spectrum = eig.eigenvalues().reverse().eval().array().max(0.0).matrix();
    t.values = Vector::Zero(n + 1);
    for (Index i = n - 1; i >= 0; --i) {
        t.values[i] = t.values[i + 1] + t.spectrum[i];
    }
    return t;
}

}  // namespace co2
