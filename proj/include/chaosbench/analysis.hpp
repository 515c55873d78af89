#pragma once

// Accuracy metrics: short-term departure horizon, z-maxima return maps with
// piecewise polynomial fits, Lyapunov spectra of flows and of closed-loop
// forecasters, and the one-step consistency error.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "chaosbench/dynamics.hpp"

namespace chaosbench {

// ---------------------------------------------------------------------------
// Short-term accuracy

/// Root-mean-square Euclidean norm of the trajectory's points.
template <Real T>
double rms_norm(const Trajectory<T>& t) {
    if (t.points.empty()) throw std::invalid_argument("rms_norm: empty trajectory");
    double acc = 0.0;
    for (const auto& p : t.points) {
        const auto a = to_array(p);
        acc += a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    }
    return std::sqrt(acc / static_cast<double>(t.points.size()));
}

/// Time of the first sample where |pred - ref| / rms_norm(ref) exceeds
/// threshold. Both trajectories start at the same point (index 0). Returns
/// the last compared time if the threshold is never exceeded.
template <Real P, Real R>
double tau_lim(const Trajectory<P>& pred, const Trajectory<R>& ref, double threshold = 0.05) {
    if (pred.points.empty() || ref.points.empty()) throw std::invalid_argument("tau_lim: empty trajectory");
    const double dt = to_double(ref.dt);
    if (std::abs(to_double(pred.dt) - dt) > 1e-6 * dt) throw std::invalid_argument("tau_lim: dt mismatch");
    const double scale = rms_norm(ref);
    const std::size_t n = std::min(pred.size(), ref.size());
    for (std::size_t i = 0; i < n; ++i)
        if (distance(pred.points[i], ref.points[i]) / scale > threshold) return static_cast<double>(i) * dt;
    return static_cast<double>(n - 1) * dt;
}

// ---------------------------------------------------------------------------
// Return map

/// Parabolic-interpolated peaks of z(t) at samples with z[i-1] < z[i] >= z[i+1].
std::vector<double> extract_maxima(const std::vector<double>& z);

template <Real T>
std::vector<double> extract_maxima(const Trajectory<T>& traj) {
    std::vector<double> z;
    z.reserve(traj.size());
    for (const auto& p : traj.points) z.push_back(to_double(p.z));
    return extract_maxima(z);
}

struct ReturnMap {
    std::vector<std::pair<double, double>> pairs;  // (Z_i, Z_{i+1})
};

ReturnMap make_return_map(const std::vector<double>& maxima);

/// Least-squares polynomial on the abscissa window [lo, hi], evaluated on
/// the affinely scaled variable u = (x - center) / half_width in [-1, 1].
struct PolyBranch {
    double lo = 0.0, hi = 0.0;
    std::vector<double> coeffs;  // ascending powers of u

    bool contains(double x) const { return x >= lo && x <= hi; }
    double operator()(double x) const;
};

PolyBranch fit_branch(const std::vector<std::pair<double, double>>& points, int degree, double lo, double hi);

struct ReturnMapFit {
    double cusp = 0.0;
    PolyBranch left, right;
};

struct ReturnMapFitOptions {
    int degree = 10;
    double cusp_exclusion = 0.01;  // relative band around the cusp
    std::size_t min_pairs = 200;
    std::size_t min_branch = 50;
};

ReturnMapFit fit_return_map(const ReturnMap& rm, const ReturnMapFitOptions& opt = {});

/// Mean of |P(Z_i) - Z_{i+1}| / |Z_{i+1}| over pairs inside a fit window.
double return_map_error(const ReturnMap& rm, const ReturnMapFit& fit);

// ---------------------------------------------------------------------------
// Lyapunov spectra

struct LyapunovSpectrum {
    std::array<double, 3> lambdas{};  // descending, per unit time
    std::size_t n_steps = 0;
    std::string method;               // "ode-tangent" | "network-jacobian"

    double sum() const { return lambdas[0] + lambdas[1] + lambdas[2]; }
};

struct LyapunovOdeOptions {
    std::size_t transient = 1000;
    std::size_t reortho_every = 1;
};

/// Benettin estimate: the state and three tangent vectors are advanced
/// together by RK4 on the variational system at precision T and
/// re-orthonormalized by modified Gram-Schmidt.
template <Real T>
LyapunovSpectrum lyapunov_ode(const VectorField<T>& field, const State3<T>& ic, T dt, std::size_t n_steps,
                              const LyapunovOdeOptions& opt = {});

/// Same estimate for a linear field x' = A x (used to validate the QR
/// bookkeeping against exact exponents).
LyapunovSpectrum lyapunov_linear(const Mat3& a, double dt, std::size_t n_steps);

// ---------------------------------------------------------------------------
// Closed-loop maps

/// A closed-loop forecaster viewed as a discrete map on its internal state.
/// `step` advances the state by one output; `tangent` replaces every vector
/// in `vs` by J(state) v, with J the map's Jacobian at the pre-step state.
struct DiscreteMap {
    std::size_t dim = 0;
    std::function<void(std::vector<double>& state)> step;
    std::function<void(const std::vector<double>& state, std::vector<std::vector<double>>& vs)> tangent;
};

struct LyapunovMapOptions {
    std::size_t transient = 1000;
};

/// Top three exponents of a discrete map, divided by dt.
LyapunovSpectrum lyapunov_map(const DiscreteMap& map, std::vector<double> state, double dt, std::size_t n_steps,
                              const LyapunovMapOptions& opt = {});

/// Tangent map by central differences along each vector, with step
/// h = rel_step * max(1, |state|_inf) / |v|.
std::function<void(const std::vector<double>&, std::vector<std::vector<double>>&)> finite_difference_tangent(
    std::function<void(std::vector<double>&)> step, double rel_step = 1e-6);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
};

MeanStd mean_std(const std::vector<double>& xs);

/// For each t in [start, start + n), the distance between pred[t+1] and one
/// extended-precision RK4 step taken from pred[t].
template <Real T>
MeanStd one_step_error(const Trajectory<T>& pred, const VectorField<DDouble>& field, std::size_t start = 25000,
                       std::size_t n = 10000);

}  // namespace chaosbench
