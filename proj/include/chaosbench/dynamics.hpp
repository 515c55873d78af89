#pragma once

// Lorenz and Rossler vector fields, the classical RK4 step, trajectories and
// divergence curves. Everything is templated on the scalar type so that each
// arithmetic operation rounds at the declared precision.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chaosbench/errors.hpp"
#include "chaosbench/precision.hpp"

namespace chaosbench {

enum class System { Lorenz, Rossler };

std::string_view to_string(System s);
System parse_system(std::string_view text);

template <Real T>
struct State3 {
    T x{}, y{}, z{};

    friend State3 operator+(const State3& a, const State3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend State3 operator-(const State3& a, const State3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend State3 operator*(T k, const State3& a) { return {k * a.x, k * a.y, k * a.z}; }
    friend bool operator==(const State3&, const State3&) = default;

    T operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    bool finite() const { return finite_r(x) && finite_r(y) && finite_r(z); }
};

template <Real To, Real From>
State3<To> convert(const State3<From>& s) {
    return {precision_cast<To>(s.x), precision_cast<To>(s.y), precision_cast<To>(s.z)};
}

template <Real T>
std::array<double, 3> to_array(const State3<T>& s) {
    return {to_double(s.x), to_double(s.y), to_double(s.z)};
}

template <Real T>
struct LorenzParams {
    T sigma = T(10);
    T rho = T(28);
    T beta = rational<T>(8, 3);
};

template <Real T>
struct RosslerParams {
    T a = rational<T>(1, 5);
    T b = rational<T>(1, 5);
    T c = rational<T>(57, 10);
};

template <Real T>
State3<T> lorenz_rhs(const State3<T>& s, const LorenzParams<T>& p) {
    return {p.sigma * (s.y - s.x), s.x * (p.rho - s.z) - s.y, s.x * s.y - p.beta * s.z};
}

template <Real T>
State3<T> rossler_rhs(const State3<T>& s, const RosslerParams<T>& p) {
    return {-s.y - s.z, s.x + p.a * s.y, p.b + s.z * (s.x - p.c)};
}

using Mat3 = std::array<std::array<double, 3>, 3>;

/// A system together with its parameters at precision T.
template <Real T>
struct VectorField {
    System system = System::Lorenz;
    LorenzParams<T> lorenz{};
    RosslerParams<T> rossler{};

    State3<T> operator()(const State3<T>& s) const {
        return system == System::Lorenz ? lorenz_rhs(s, lorenz) : rossler_rhs(s, rossler);
    }

    /// Jacobian-vector product J(s) v at precision T.
    State3<T> jvp(const State3<T>& s, const State3<T>& v) const {
        if (system == System::Lorenz) {
            const auto& p = lorenz;
            return {p.sigma * (v.y - v.x), (p.rho - s.z) * v.x - v.y - s.x * v.z, s.y * v.x + s.x * v.y - p.beta * v.z};
        }
        const auto& p = rossler;
        return {-v.y - v.z, v.x + p.a * v.y, s.z * v.x + (s.x - p.c) * v.z};
    }

    /// Analytic Jacobian evaluated in double.
    Mat3 jacobian(const State3<double>& s) const {
        if (system == System::Lorenz) {
            const double sigma = to_double(lorenz.sigma), rho = to_double(lorenz.rho),
                         beta = to_double(lorenz.beta);
            return {{{-sigma, sigma, 0.0}, {rho - s.z, -1.0, -s.x}, {s.y, s.x, -beta}}};
        }
        const double a = to_double(rossler.a), c = to_double(rossler.c);
        return {{{0.0, -1.0, -1.0}, {1.0, a, 0.0}, {s.z, 0.0, s.x - c}}};
    }
};

template <Real T>
VectorField<T> default_field(System system) {
    VectorField<T> f;
    f.system = system;
    return f;
}

/// One classical RK4 step for any state type closed under + and scalar *.
template <Real T, class V, class F>
V rk4_advance(const V& s, T dt, const F& f) {
    const T half = dt / T(2);
    const V k1 = f(s);
    const V k2 = f(s + half * k1);
    const V k3 = f(s + half * k2);
    const V k4 = f(s + dt * k3);
    return s + (dt / T(6)) * (k1 + T(2) * k2 + T(2) * k3 + k4);
}

/// RK4 step on a 3-state; throws IntegrationDiverged(step_index) when the
/// result is not finite.
template <Real T, class F>
State3<T> rk4_step(const State3<T>& s, T dt, const F& rhs, std::size_t step_index = 0) {
    State3<T> next = rk4_advance(s, dt, rhs);
    if (!next.finite()) throw IntegrationDiverged(step_index);
    return next;
}

template <Real T>
struct Trajectory {
    System system = System::Lorenz;
    T dt = from_double<T>(0.02);
    std::vector<State3<T>> points;
    std::uint64_t seed = 0;
    std::string provenance;

    using value_type = T;
    static constexpr Precision precision = precision_v<T>;

    std::size_t size() const { return points.size(); }
    /// Number of steps, i.e. points - 1.
    std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
};

template <Real To, Real From>
Trajectory<To> convert(const Trajectory<From>& t) {
    Trajectory<To> out;
    out.system = t.system;
    out.dt = precision_cast<To>(t.dt);
    out.seed = t.seed;
    out.provenance = t.provenance;
    out.points.reserve(t.points.size());
    for (const auto& p : t.points) out.points.push_back(convert<To>(p));
    return out;
}

/// Trajectory of n + 1 points starting at ic.
template <Real T>
Trajectory<T> integrate(const State3<T>& ic, std::size_t n, T dt, const VectorField<T>& field) {
    if (!(dt > T(0))) throw std::invalid_argument("dt must be positive");
    Trajectory<T> traj;
    traj.system = field.system;
    traj.dt = dt;
    traj.provenance = "rk4";
    traj.points.reserve(n + 1);
    traj.points.push_back(ic);
    State3<T> s = ic;
    for (std::size_t i = 1; i <= n; ++i) {
        s = rk4_step(s, dt, field, i);
        traj.points.push_back(s);
    }
    return traj;
}

template <Real T>
Trajectory<T> integrate(const State3<T>& ic, std::size_t n, T dt, System system) {
    return integrate(ic, n, dt, default_field<T>(system));
}

/// Advances s by n RK4 steps without storing intermediate points.
template <Real T>
State3<T> advance(State3<T> s, std::size_t n, T dt, const VectorField<T>& field) {
    for (std::size_t i = 1; i <= n; ++i) s = rk4_step(s, dt, field, i);
    return s;
}

/// Euclidean distance; the difference is formed in the wider of the two
/// precisions and accumulated in double.
template <Real A, Real B>
double distance(const State3<A>& a, const State3<B>& b) {
    using W = std::conditional_t<(precision_v<A> < precision_v<B>), B, A>;
    const State3<W> d = convert<W>(a) - convert<W>(b);
    const double dx = to_double(d.x), dy = to_double(d.y), dz = to_double(d.z);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct DivergencePoint {
    double t;
    double distance;
};

template <Real A, Real B>
std::vector<DivergencePoint> divergence_series(const Trajectory<A>& a, const Trajectory<B>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("divergence_series: length mismatch");
    const double dta = to_double(a.dt), dtb = to_double(b.dt);
    if (std::abs(dta - dtb) > 1e-6 * std::abs(dta))
        throw std::invalid_argument("divergence_series: dt mismatch");
    std::vector<DivergencePoint> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out.push_back({static_cast<double>(i) * dta, distance(a.points[i], b.points[i])});
    return out;
}

/// First time the distance exceeds threshold; the last time if it never does.
double separation_time(const std::vector<DivergencePoint>& series, double threshold);

using AnyTrajectory = std::variant<Trajectory<float>, Trajectory<double>, Trajectory<DDouble>>;

Precision precision_of_any(const AnyTrajectory& t);

/// Header line `system dt n precision seed` (n = steps), then `x y z` rows in
/// shortest round-trip decimal.
template <Real T>
void write_trajectory(std::ostream& os, const Trajectory<T>& traj);

/// Reads the native format, or CSV with a header row naming x,y,z (and
/// optionally t). CSV input carries no metadata, so `fallback` supplies
/// system, dt and precision unless a t column fixes dt.
struct CsvDefaults {
    System system = System::Lorenz;
    double dt = 0.02;
    Precision precision = Precision::Double;
};
AnyTrajectory read_trajectory(std::istream& is, const CsvDefaults& fallback = {});

void save_trajectory(const std::string& path, const AnyTrajectory& traj);
AnyTrajectory load_trajectory(const std::string& path, const CsvDefaults& fallback = {});

}  // namespace chaosbench
