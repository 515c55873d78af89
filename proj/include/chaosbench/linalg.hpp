#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "chaosbench/precision.hpp"

namespace chaosbench {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct SpectralRadius {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Largest eigenvalue modulus by power iteration. Each iterate is fitted to
/// the two-term recurrence x_{k+2} = p x_{k+1} + q x_k, whose roots recover
/// a dominant real eigenvalue or a dominant complex-conjugate pair.
SpectralRadius spectral_radius(const Mat<double>& m, double tol = 1e-10, int max_iter = 10000);

template <NetReal T>
SpectralRadius spectral_radius(const Mat<T>& m, double tol = 1e-10, int max_iter = 10000) {
    if constexpr (std::is_same_v<T, double>) {
        return spectral_radius(static_cast<const Mat<double>&>(m), tol, max_iter);
    } else {
        return spectral_radius(Mat<double>(m.template cast<double>()), tol, max_iter);
    }
}

/// `name rows cols` followed by one row per line in round-trip decimals.
template <NetReal T>
void write_matrix(std::ostream& os, const std::string& name, const Mat<T>& m) {
    os << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ' ';
            os << format_real(m(r, c));
        }
        os << '\n';
    }
}

template <NetReal T>
Mat<T> read_matrix(std::istream& is, const std::string& name) {
    std::string tag;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> tag >> rows >> cols) || tag != name)
        throw std::runtime_error("model file: expected matrix '" + name + "'");
    Mat<T> m(rows, cols);
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!(is >> tok)) throw std::runtime_error("model file: truncated matrix '" + name + "'");
            m(r, c) = parse_real<T>(tok);
        }
    return m;
}

}  // namespace chaosbench
