#include "co2/kernels.hpp"

#include <cmath>
#include <random>

namespace co2 {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
    const bool self = (&a == &b);
    Matrix cross = a * b.transpose();
    Vector ra = a.rowwise().squaredNorm();
    Vector rb = self ? ra : Vector(b.rowwise().squaredNorm());
    Matrix out(a.rows(), b.rows());
    if (self) {
        for (Index i = 0; i < a.rows(); ++i) {
            out(i, i) = 0.0;
            for (Index j = i + 1; j < a.rows(); ++j) {
                const double d = std::max(0.0, ra[i] + ra[j] - 2.0 * cross(i, j));
                out(i, j) = d;
                out(j, i) = d;
            }
        }
    } else {
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < b.rows(); ++j)
                out(i, j) = std::max(0.0, ra[i] + rb[j] - 2.0 * cross(i, j));
    }
    return out;
}

double kernel_eval(const GaussianKernel& k, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y) {
    if (k.epsilon <= 0.0) throw UsageError("kernel bandwidth must be positive");
    if (x.size() != y.size()) throw std::runtime_error("kernel_eval: dimension mismatch");
    return std::exp(-(x - y).squaredNorm() / k.epsilon);
}

GramMatrix gram(const GaussianKernel& k, const PointCloud& cloud) {
    if (k.epsilon <= 0.0) throw UsageError("kernel bandwidth must be positive");
    validate(cloud);
    GramMatrix K;
    K.epsilon = k.epsilon;
    K.cloud = &cloud;
    K.entries = (-squared_distances(cloud.points, cloud.points) / k.epsilon).array().exp();
    K.entries.diagonal().setOnes();
    return K;
}

namespace {

double clamp_quadratic(double v, const char* what) {
    if (v >= 0.0) return v;
    if (v >= -1e-10) return 0.0;
    throw std::runtime_error(std::string(what) +
                             ": quadratic form is " + std::to_string(v) +
                             "; input matrix is not numerically PSD");
}

}  // namespace

double mmd_sq(const GramMatrix& K, const DiscreteDistribution& a,
              const DiscreteDistribution& b) {
    if (a.cloud != K.cloud || b.cloud != K.cloud)
        throw std::runtime_error("mmd_sq: distributions must share the Gram matrix's cloud");
    Vector w = a.weights - b.weights;
    return clamp_quadratic(quad_form(K.entries, w), "mmd_sq");
}

double quad_form(const Eigen::Ref<const Matrix>& K, const Eigen::Ref<const Vector>& w) {
    if (K.rows() != K.cols() || K.rows() != w.size())
        throw std::runtime_error("quad_form: length mismatch");
    return w.dot(K * w);
}

bool psd_probe(const Eigen::Ref<const Matrix>& K, int probes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(K.rows());
    for (int p = 0; p < probes; ++p) {
        for (Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
        if (v.dot(K * v) < -1e-8 * v.squaredNorm()) return false;
    }
    return true;
}

}  // namespace co2
