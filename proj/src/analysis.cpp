#include "chaosbench/analysis.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Dense>

#include "chaosbench/rng.hpp"

namespace chaosbench {

// ---------------------------------------------------------------------------
// Return map

std::vector<double> extract_maxima(const std::vector<double>& z) {
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < z.size(); ++i) {
        const double a = z[i - 1], b = z[i], c = z[i + 1];
        if (!(a < b && b >= c)) continue;
        const double curvature = 2.0 * b - a - c;
        peaks.push_back(curvature > 0.0 ? b + (c - a) * (c - a) / (8.0 * curvature) : b);
    }
    return peaks;
}

ReturnMap make_return_map(const std::vector<double>& maxima) {
    ReturnMap rm;
    if (maxima.size() < 2) return rm;
    rm.pairs.reserve(maxima.size() - 1);
    for (std::size_t i = 0; i + 1 < maxima.size(); ++i) rm.pairs.emplace_back(maxima[i], maxima[i + 1]);
    return rm;
}

double PolyBranch::operator()(double x) const {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double u = half > 0.0 ? (x - center) / half : 0.0;
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
    return acc;
}

PolyBranch fit_branch(const std::vector<std::pair<double, double>>& points, int degree, double lo, double hi) {
    if (degree < 0) throw std::invalid_argument("fit_branch: negative degree");
    PolyBranch branch;
    branch.lo = lo;
    branch.hi = hi;
    std::vector<std::pair<double, double>> inside;
    for (const auto& p : points)
        if (branch.contains(p.first)) inside.push_back(p);
    const auto cols = static_cast<Eigen::Index>(degree + 1);
    if (static_cast<Eigen::Index>(inside.size()) < cols)
        throw std::invalid_argument("fit_branch: fewer points than coefficients");

    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    Eigen::MatrixXd vander(static_cast<Eigen::Index>(inside.size()), cols);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(inside.size()));
    for (Eigen::Index r = 0; r < vander.rows(); ++r) {
        const double u = half > 0.0 ? (inside[r].first - center) / half : 0.0;
        double pw = 1.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            vander(r, c) = pw;
            pw *= u;
        }
        rhs(r) = inside[r].second;
    }
    const Eigen::VectorXd coef = vander.colPivHouseholderQr().solve(rhs);
    branch.coeffs.assign(coef.data(), coef.data() + coef.size());
    return branch;
}

namespace {

// Cusp = abscissa where the running median of Z_{i+1} (pairs sorted by Z_i)
// peaks.
double locate_cusp(std::vector<std::pair<double, double>> pairs) {
    std::sort(pairs.begin(), pairs.end());
    const std::size_t n = pairs.size();
    const std::size_t half = std::clamp<std::size_t>(n / 200, 2, 250);
    double best = -std::numeric_limits<double>::infinity();
    double cusp = pairs.front().first;
    std::vector<double> window;
    for (std::size_t i = half; i + half < n; ++i) {
        window.clear();
        for (std::size_t j = i - half; j <= i + half; ++j) window.push_back(pairs[j].second);
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
        std::nth_element(window.begin(), mid, window.end());
        if (*mid > best) {
            best = *mid;
            cusp = pairs[i].first;
        }
    }
    return cusp;
}

}  // namespace

ReturnMapFit fit_return_map(const ReturnMap& rm, const ReturnMapFitOptions& opt) {
    if (rm.pairs.size() < opt.min_pairs)
        throw std::invalid_argument("fit_return_map: need at least " + std::to_string(opt.min_pairs) + " pairs, got " +
                                    std::to_string(rm.pairs.size()));
    ReturnMapFit fit;
    fit.cusp = locate_cusp(rm.pairs);
    const double band = opt.cusp_exclusion * std::abs(fit.cusp);

    std::vector<std::pair<double, double>> left, right;
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    for (const auto& p : rm.pairs) {
        if (p.first < fit.cusp - band) {
            left.push_back(p);
            min_x = std::min(min_x, p.first);
        } else if (p.first > fit.cusp + band) {
            right.push_back(p);
            max_x = std::max(max_x, p.first);
        }
    }
    if (left.size() < opt.min_branch || right.size() < opt.min_branch)
        throw std::invalid_argument("fit_return_map: insufficient points per branch (left " +
                                    std::to_string(left.size()) + ", right " + std::to_string(right.size()) + ")");
    fit.left = fit_branch(left, opt.degree, min_x, fit.cusp - band);
    fit.right = fit_branch(right, opt.degree, fit.cusp + band, max_x);
    return fit;
}

double return_map_error(const ReturnMap& rm, const ReturnMapFit& fit) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& [zi, znext] : rm.pairs) {
        const PolyBranch* branch = fit.left.contains(zi) ? &fit.left : (fit.right.contains(zi) ? &fit.right : nullptr);
        if (branch == nullptr || znext == 0.0) continue;
        acc += std::abs((*branch)(zi) - znext) / std::abs(znext);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("return_map_error: no pairs inside the fit windows");
    return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Lyapunov spectra of flows

namespace {

template <Real T>
struct TangentState {
    State3<T> s;
    std::array<State3<T>, 3> v;

    friend TangentState operator+(const TangentState& a, const TangentState& b) {
        return {a.s + b.s, {a.v[0] + b.v[0], a.v[1] + b.v[1], a.v[2] + b.v[2]}};
    }
    friend TangentState operator*(T k, const TangentState& a) {
        return {k * a.s, {k * a.v[0], k * a.v[1], k * a.v[2]}};
    }
};

template <Real T>
T dot(const State3<T>& a, const State3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <Real T>
std::array<double, 3> orthonormalize(std::array<State3<T>, 3>& v) {
    std::array<double, 3> norms{};
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < k; ++j) v[k] = v[k] - dot(v[j], v[k]) * v[j];
        const T nrm = sqrt_r(dot(v[k], v[k]));
        norms[k] = to_double(nrm);
        v[k] = (T(1) / nrm) * v[k];
    }
    return norms;
}

LyapunovSpectrum finish(std::array<double, 3> sums, double total_time, std::size_t n, std::string method) {
    LyapunovSpectrum out;
    for (std::size_t k = 0; k < 3; ++k) out.lambdas[k] = sums[k] / total_time;
    std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>());
    out.n_steps = n;
    out.method = std::move(method);
    return out;
}

}  // namespace

template <Real T>
LyapunovSpectrum lyapunov_ode(const VectorField<T>& field, const State3<T>& ic, T dt, std::size_t n_steps,
                              const LyapunovOdeOptions& opt) {
    if (n_steps == 0) throw std::invalid_argument("lyapunov_ode: n_steps must be positive");
    const std::size_t every = std::max<std::size_t>(1, opt.reortho_every);
    State3<T> s = advance(ic, opt.transient, dt, field);

    TangentState<T> ts{s, {State3<T>{T(1), T(0), T(0)}, State3<T>{T(0), T(1), T(0)}, State3<T>{T(0), T(0), T(1)}}};
    auto rhs = [&](const TangentState<T>& x) {
        return TangentState<T>{field(x.s), {field.jvp(x.s, x.v[0]), field.jvp(x.s, x.v[1]), field.jvp(x.s, x.v[2])}};
    };
    std::array<double, 3> sums{};
    for (std::size_t i = 1; i <= n_steps; ++i) {
        ts = rk4_advance(ts, dt, rhs);
        if (!ts.s.finite()) throw IntegrationDiverged(i);
        if (i % every == 0 || i == n_steps) {
            const auto norms = orthonormalize(ts.v);
            for (std::size_t k = 0; k < 3; ++k) sums[k] += std::log(norms[k]);
        }
    }
    return finish(sums, static_cast<double>(n_steps) * to_double(dt), n_steps, "ode-tangent");
}

template LyapunovSpectrum lyapunov_ode(const VectorField<float>&, const State3<float>&, float, std::size_t,
                                       const LyapunovOdeOptions&);
template LyapunovSpectrum lyapunov_ode(const VectorField<double>&, const State3<double>&, double, std::size_t,
                                       const LyapunovOdeOptions&);

LyapunovSpectrum lyapunov_linear(const Mat3& a, double dt, std::size_t n_steps) {
    using V3 = State3<double>;
    auto apply = [&](const V3& v) {
        return V3{a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z, a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
                  a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z};
    };
    std::array<V3, 3> v{V3{1, 0, 0}, V3{0, 1, 0}, V3{0, 0, 1}};
    // Skew the start so no vector is aligned with an eigendirection.
    v[1] = v[1] + 0.5 * v[0];
    v[2] = v[2] + 0.25 * v[0] + 0.5 * v[1];
    orthonormalize(v);
    std::array<double, 3> sums{};
    for (std::size_t i = 0; i < n_steps; ++i) {
        for (auto& vk : v) vk = rk4_advance(vk, dt, apply);
        const auto norms = orthonormalize(v);
        for (std::size_t k = 0; k < 3; ++k) sums[k] += std::log(norms[k]);
    }
    return finish(sums, static_cast<double>(n_steps) * dt, n_steps, "ode-tangent");
}

// ---------------------------------------------------------------------------
// Lyapunov spectra of closed-loop maps

namespace {

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::array<double, 3> orthonormalize(std::vector<std::vector<double>>& v) {
    std::array<double, 3> norms{};
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < k; ++j) {
            const double c = vdot(v[j], v[k]);
            for (std::size_t i = 0; i < v[k].size(); ++i) v[k][i] -= c * v[j][i];
        }
        const double nrm = std::sqrt(vdot(v[k], v[k]));
        norms[k] = nrm;
        for (auto& x : v[k]) x /= nrm;
    }
    return norms;
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LyapunovSpectrum lyapunov_map(const DiscreteMap& map, std::vector<double> state, double dt, std::size_t n_steps,
                              const LyapunovMapOptions& opt) {
    if (state.size() != map.dim) throw std::invalid_argument("lyapunov_map: state dimension mismatch");
    if (map.dim < 3) throw std::invalid_argument("lyapunov_map: state dimension below 3");
    if (n_steps == 0) throw std::invalid_argument("lyapunov_map: n_steps must be positive");

    CounterRng rng(derive_key(0x1a9u, {map.dim}));
    std::vector<std::vector<double>> v(3, std::vector<double>(map.dim));
    for (auto& vk : v)
        for (auto& x : vk) x = rng.uniform() - 0.5;
    orthonormalize(v);

    std::array<double, 3> sums{};
    const std::size_t total = opt.transient + n_steps;
    for (std::size_t i = 0; i < total; ++i) {
        map.tangent(state, v);
        map.step(state);
        if (!all_finite(state)) throw PredictionDiverged(i);
        const auto norms = orthonormalize(v);
        if (i >= opt.transient)
            for (std::size_t k = 0; k < 3; ++k) sums[k] += std::log(norms[k]);
    }
    return finish(sums, static_cast<double>(n_steps) * dt, n_steps, "network-jacobian");
}

std::function<void(const std::vector<double>&, std::vector<std::vector<double>>&)> finite_difference_tangent(
    std::function<void(std::vector<double>&)> step, double rel_step) {
    return [step = std::move(step), rel_step](const std::vector<double>& state, std::vector<std::vector<double>>& vs) {
        double scale = 1.0;
        for (double x : state) scale = std::max(scale, std::abs(x));
        std::vector<double> plus(state.size()), minus(state.size());
        for (auto& v : vs) {
            const double vn = std::sqrt(vdot(v, v));
            if (vn == 0.0) continue;
            const double h = rel_step * scale / vn;
            for (std::size_t i = 0; i < state.size(); ++i) {
                plus[i] = state[i] + h * v[i];
                minus[i] = state[i] - h * v[i];
            }
            step(plus);
            step(minus);
            for (std::size_t i = 0; i < state.size(); ++i) v[i] = (plus[i] - minus[i]) / (2.0 * h);
        }
    };
}

// ---------------------------------------------------------------------------
// One-step consistency

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    r.n = xs.size();
    if (xs.empty()) return r;
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() >= 2) {
        double acc = 0.0;
        for (double x : xs) acc += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return r;
}

template <Real T>
MeanStd one_step_error(const Trajectory<T>& pred, const VectorField<DDouble>& field, std::size_t start,
                       std::size_t n) {
    if (pred.size() < start + n + 1)
        throw std::invalid_argument("one_step_error: need " + std::to_string(start + n + 1) + " points, have " +
                                    std::to_string(pred.size()));
    // The nominal decimal step (e.g. 0.02) rather than its binary rounding.
    const DDouble dt = parse_ddouble(format_real(pred.dt));
    std::vector<double> errs;
    errs.reserve(n);
    for (std::size_t t = start; t < start + n; ++t) {
        if (!pred.points[t].finite() || !pred.points[t + 1].finite()) throw PredictionDiverged(t);
        const State3<DDouble> ref = rk4_step(convert<DDouble>(pred.points[t]), dt, field, t);
        errs.push_back(distance(pred.points[t + 1], ref));
    }
    return mean_std(errs);
}

template MeanStd one_step_error(const Trajectory<float>&, const VectorField<DDouble>&, std::size_t, std::size_t);
template MeanStd one_step_error(const Trajectory<double>&, const VectorField<DDouble>&, std::size_t, std::size_t);
template MeanStd one_step_error(const Trajectory<DDouble>&, const VectorField<DDouble>&, std::size_t, std::size_t);

}  // namespace chaosbench
