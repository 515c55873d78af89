#pragma once

// Echo state network with a leaky-tanh reservoir and a ridge-regression
// readout:
//
//   x~_n = tanh(W_in [1; u_n] + W x_{n-1} + eps0 + mu0)
//   x_n  = (1 - alpha) x_{n-1} + alpha x~_n
//   y_n  = W_out [1; u_n; x_n]
//
// W and W_in are drawn once and frozen; only W_out is trained. All
// arithmetic runs at the model's scalar type T.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chaosbench/analysis.hpp"
#include "chaosbench/dynamics.hpp"
#include "chaosbench/linalg.hpp"
#include "chaosbench/rng.hpp"

namespace chaosbench {

struct EsnConfig {
    std::size_t reservoir_size = 300;
    double leak = 0.3;
    double spectral_radius = 0.625;
    double input_density = 0.464;
    double input_std = 3.352;
    double reservoir_density = 0.483;
    double reservoir_std = 2.901;
    double offset = -1.154;
    double noise_std = 2.25e-5;
    /// Ridge strength; when unset it follows default_ridge_beta(precision, columns).
    std::optional<double> ridge_beta;
    std::size_t washout = 100;
    /// Divide inputs by this before W_in (attractor-scale normalization).
    double input_scale = 30.0;
    Precision precision = Precision::Double;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Log-linear in the number of training columns between (5e3, 1e-8) and
/// (5e5, 1e-7) at double precision, (5e3, 1e-4) and (5e5, 1e-1) at single;
/// clamped outside that range.
double default_ridge_beta(Precision p, std::size_t training_columns);

template <NetReal T>
struct EsnState {
    Vec<T> x;
};

template <NetReal T>
struct EsnModel {
    EsnConfig config;
    Mat<T> W;      // N x N
    Mat<T> W_in;   // N x 4, acts on [1; u]
    Mat<T> W_out;  // 3 x (N + 4), acts on [1; u; x]
    double ridge_beta_used = 0.0;
    bool trained = false;

    std::size_t reservoir_size() const { return static_cast<std::size_t>(W.rows()); }
    std::size_t trainable_parameters() const { return 3 * (reservoir_size() + 4); }
    /// Trainable plus the nonzero entries of W and W_in.
    std::size_t total_parameters() const;

    EsnState<T> zero_state() const { return {Vec<T>::Zero(W.rows())}; }
};

/// Draws W and W_in from the config's seed and rescales W to the target
/// spectral radius. Throws InitDegenerate if the draw has zero spectral radius.
template <NetReal T>
EsnModel<T> init_esn(const EsnConfig& cfg);

/// Gaussian noise source for the reservoir update; nullptr disables noise.
struct ReservoirNoise {
    explicit ReservoirNoise(CounterRng rng, double std) : rng_(rng), gauss_(0.0, std) {}
    double draw() { return gauss_(rng_); }

private:
    CounterRng rng_;
    std::normal_distribution<double> gauss_;
};

template <NetReal T>
EsnState<T> reservoir_step(const EsnModel<T>& m, const EsnState<T>& st, const State3<T>& u,
                           ReservoirNoise* noise = nullptr);

/// Readout features [1; u; x].
template <NetReal T>
Vec<T> readout_features(const State3<T>& u, const EsnState<T>& st);

template <NetReal T>
State3<T> readout(const EsnModel<T>& m, const State3<T>& u, const EsnState<T>& st);

/// Teacher-forced training on every trajectory (zero state at each start,
/// noise on, first `washout` columns of each trajectory dropped), then
///   W_out = Y X^T (X X^T + beta I)^{-1}.
template <NetReal T>
EsnModel<T> train_readout(EsnModel<T> m, const std::vector<Trajectory<T>>& trajs);

/// Ridge solve on explicit feature columns X ((N+4) x T) and targets Y (3 x T).
template <NetReal T>
Mat<T> solve_ridge(const Mat<T>& X, const Mat<T>& Y, double beta);

/// Drives the reservoir through `warm` without noise and returns the state
/// after the last point.
template <NetReal T>
EsnState<T> warm_up(const EsnModel<T>& m, const Trajectory<T>& warm);

/// Teacher-forces through `warm`, then runs n autonomous steps. The result
/// holds the n predicted points.
template <NetReal T>
Trajectory<T> predict_closed_loop(const EsnModel<T>& m, const Trajectory<T>& warm, std::size_t n);

/// Closed-loop continuation from an explicit state: `u` is the last input.
template <NetReal T>
Trajectory<T> run_closed_loop(const EsnModel<T>& m, EsnState<T> st, State3<T> u, std::size_t n, T dt);

/// The closed loop as a discrete map on (u, x) with its analytic Jacobian.
template <NetReal T>
DiscreteMap closed_loop_map(const EsnModel<T>& m);

template <NetReal T>
std::vector<double> pack_state(const State3<T>& u, const EsnState<T>& st);

template <NetReal T>
void save_esn(std::ostream& os, const EsnModel<T>& m);

/// Reads a model written by save_esn at precision T; throws if the file's
/// precision differs.
template <NetReal T>
EsnModel<T> load_esn(std::istream& is);

/// Precision recorded in a model file header without consuming the model.
Precision peek_model_precision(std::istream& is);

}  // namespace chaosbench
