#include "chaosbench/linalg.hpp"

#include <cmath>

#include "chaosbench/rng.hpp"

namespace chaosbench {

namespace {

// Largest root modulus of lambda^2 - p lambda - q.
double dominant_root(double p, double q) {
    const double disc = p * p + 4.0 * q;
    if (disc < 0.0) return std::sqrt(-q);
    const double s = std::sqrt(disc);
    return std::max(std::abs(0.5 * (p + s)), std::abs(0.5 * (p - s)));
}

}  // namespace

SpectralRadius spectral_radius(const Mat<double>& m, double tol, int max_iter) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
    if (!m.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
    const Eigen::Index n = m.rows();
    SpectralRadius out;
    if (n == 0) return out;
    if (n == 1) return {std::abs(m(0, 0)), 0, true};

    CounterRng rng(derive_key(0x5eedu, {static_cast<std::uint64_t>(n)}));
    Vec<double> x0(n);
    for (Eigen::Index i = 0; i < n; ++i) x0(i) = rng.uniform() - 0.5;
    x0.normalize();
    Vec<double> x1 = m * x0;
    if (x1.norm() == 0.0) {
        // Random start landed in the kernel; restart from the all-ones vector.
        x0 = Vec<double>::Ones(n).normalized();
        x1 = m * x0;
        if (x1.norm() == 0.0 && m.isZero(0.0)) return {0.0, 0, true};
    }

    double prev = -1.0;
    int stable = 0;
    for (int it = 1; it <= max_iter; ++it) {
        const double s = x1.norm();
        if (s == 0.0) return {0.0, it, true};
        x0 /= s;
        x1 /= s;
        const Vec<double> x2 = m * x1;

        // Least squares for x2 ~ p x1 + q x0 via the 2x2 normal equations.
        const double a11 = x1.squaredNorm(), a12 = x1.dot(x0), a22 = x0.squaredNorm();
        const double b1 = x1.dot(x2), b2 = x0.dot(x2);
        const double det = a11 * a22 - a12 * a12;
        double est;
        if (std::abs(det) <= 1e-14 * a11 * a22) {
            // x1 parallel to x0: a single real dominant eigenvalue.
            est = std::abs(b1 / a11);
        } else {
            const double p = (b1 * a22 - b2 * a12) / det;
            const double q = (a11 * b2 - a12 * b1) / det;
            est = dominant_root(p, q);
        }
        out.value = est;
        out.iterations = it;
        if (prev >= 0.0 && std::abs(est - prev) <= tol * std::max(est, 1e-300)) {
            if (++stable >= 3) {
                out.converged = true;
                return out;
            }
        } else {
            stable = 0;
        }
        prev = est;
        x0 = x1;
        x1 = x2;
    }
    return out;
}

}  // namespace chaosbench
