// One PASS/FAIL line per acceptance criterion. Tolerances and run sizes are
// fixed here; `acceptance 1 4 9` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "chaosbench/analysis.hpp"
#include "chaosbench/bench.hpp"
#include "chaosbench/rng.hpp"

using namespace chaosbench;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::string kWork = "acceptance_work";

// ---------------------------------------------------------------------------

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / x.size();
        my += std::log(y[i]) / y.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

// Global error at t = 1 against a 40000-step double-double RK4 run, averaged
// over on-attractor initial conditions. The slope on a 4x finer grid is
// reported alongside.
Outcome rk4_order() {
    const auto field = default_field<double>(System::Lorenz);
    const std::size_t ics = 8;
    double slope = 0, fine = 0;
    std::vector<double> mean_err(3, 0.0);
    for (std::size_t k = 0; k < ics; ++k) {
        const State3<double> ic = random_initial_condition(System::Lorenz, 2000 + k);
        const auto ref =
            advance(convert<DDouble>(ic), 40000, DDouble(1) / DDouble(40000), default_field<DDouble>(System::Lorenz));
        auto errors = [&](std::vector<int> steps) {
            std::vector<double> dts, errs;
            for (int n : steps) {
                dts.push_back(1.0 / n);
                errs.push_back(distance(advance(ic, n, 1.0 / n, field), ref));
            }
            return std::pair{dts, errs};
        };
        const auto [dts, errs] = errors({50, 100, 200});
        for (int i = 0; i < 3; ++i) mean_err[i] += errs[i] / ics;
        slope += loglog_slope(dts, errs) / ics;
        const auto [fd, fe] = errors({200, 400, 800});
        fine += loglog_slope(fd, fe) / ics;
    }
    return {std::abs(slope - 4.0) <= 0.3,
            fmt("mean slope %.3f over %zu ICs (4 +- 0.3); mean errors %.3g %.3g %.3g at dt 0.02 0.01 0.005; "
                "slope on dt 0.005..0.00125 %.3f",
                slope, ics, mean_err[0], mean_err[1], mean_err[2], fine)};
}

Outcome ode_lyapunov() {
    const auto lz = lyapunov_ode(default_field<double>(System::Lorenz), State3<double>{0.0, 0.45, 1.41}, 0.01, 2000000);
    const auto rs = lyapunov_ode(default_field<double>(System::Rossler), State3<double>{1.0, 1.0, 0.0}, 0.01, 5000000);
    const bool l1 = std::abs(lz.lambdas[0] - 0.906) <= 0.005 * 0.906;
    const bool l2 = std::abs(lz.lambdas[1]) <= 0.01;
    const bool l3 = std::abs(lz.lambdas[2] + 14.567) <= 0.005 * 14.567;
    const bool ls = std::abs(lz.sum() + 13.667) <= 0.005 * 13.667;
    const bool r1 = std::abs(rs.lambdas[0] - 0.067) <= 0.05 * 0.067;
    const bool r2 = std::abs(rs.lambdas[1]) <= 0.01;
    const bool r3 = std::abs(rs.lambdas[2] + 5.41) <= 0.02 * 5.41;
    auto mark = [](bool b) { return b ? "ok" : "OUT"; };
    return {l1 && l2 && l3 && ls && r1 && r2 && r3,
            fmt("lorenz (%.4f %s, %.5f %s, %.3f %s) sum %.4f %s; rossler (%.4f %s, %.5f %s, %.3f %s)", lz.lambdas[0],
                mark(l1), lz.lambdas[1], mark(l2), lz.lambdas[2], mark(l3), lz.sum(), mark(ls), rs.lambdas[0],
                mark(r1), rs.lambdas[1], mark(r2), rs.lambdas[2], mark(r3))};
}

Outcome divergence_ratio() {
    const double dt = 0.02;
    const std::size_t n = 4000, ics = 12;
    double ts = 0, td = 0;
    for (std::size_t k = 0; k < ics; ++k) {
        const State3<double> ic = random_initial_condition(System::Lorenz, 1000 + k, dt);
        const auto ext = integrate(convert<DDouble>(ic), n, from_decimal<DDouble>(dt), System::Lorenz);
        const auto dbl = integrate(ic, n, dt, System::Lorenz);
        const auto sgl = integrate(convert<float>(ic), n, from_decimal<float>(dt), System::Lorenz);
        const double threshold = 0.05 * rms_norm(ext);
        ts += separation_time(divergence_series(sgl, ext), threshold) / ics;
        td += separation_time(divergence_series(dbl, ext), threshold) / ics;
    }
    // Diagnostic only: double RK4 from an initial state offset by 1e-8.
    double tp = 0;
    for (std::size_t k = 0; k < ics; ++k) {
        const State3<double> ic = random_initial_condition(System::Lorenz, 1000 + k, dt);
        const auto ext = integrate(convert<DDouble>(ic), n, from_decimal<DDouble>(dt), System::Lorenz);
        const auto off = integrate(State3<double>{ic.x + 1e-8, ic.y, ic.z}, n, dt, System::Lorenz);
        tp += separation_time(divergence_series(off, ext), 0.05 * rms_norm(ext)) / ics;
    }
    const double ratio = ts / td;
    return {ratio >= 0.35 && ratio <= 0.65,
            fmt("mean separation single %.2f, double %.2f over %zu ICs; ratio %.3f (0.5 +- 30%%); "
                "double with 1e-8 initial offset %.2f (ratio %.3f)",
                ts, td, ics, ratio, tp, tp / td)};
}

Outcome return_map_fidelity() {
    const std::size_t n = 4000000;
    const State3<double> ic = random_initial_condition(System::Lorenz, 7);
    const ReturnMap ref = make_return_map(
        extract_maxima(integrate(convert<DDouble>(ic), n, from_decimal<DDouble>(0.02), System::Lorenz)));
    const ReturnMapFit fit = fit_return_map(ref);
    const ReturnMap d = make_return_map(extract_maxima(integrate(ic, n, 0.02, System::Lorenz)));
    const ReturnMap s = make_return_map(extract_maxima(integrate(convert<float>(ic), n, 0.02f, System::Lorenz)));
    const double xd = return_map_error(d, fit), xs = return_map_error(s, fit);
    const bool enough = d.pairs.size() + 1 >= 100000 && s.pairs.size() + 1 >= 100000;
    return {enough && xd < 0.002 && xs < 0.002,
            fmt("xi single %.3e (%zu maxima), double %.3e (%zu maxima), extended self %.3e; bound 2e-3", xs,
                s.pairs.size() + 1, xd, d.pairs.size() + 1, return_map_error(ref, fit))};
}

// Per-cell samples of one metric, keyed by label.
std::map<std::string, std::vector<double>> samples(const ExperimentReport& rep, const std::string& metric) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& r : rep.rows)
        if (r.metric == metric) out[r.cell.label()].push_back(r.value);
    return out;
}

std::string failures_of(const ExperimentReport& rep) {
    return rep.failures.empty() ? ""
                                : fmt("; %zu failed cell-metrics, first: %s", rep.failures.size(),
                                      rep.failures.front().reason.c_str());
}

SweepConfig sweep_base(const std::string& name) {
    SweepConfig c;
    c.output_dir = kWork + "/" + name;
    c.use_cache = false;
    c.workers = 1;
    return c;
}

std::string label(NetKind net, Precision np, Precision dp, std::size_t n) { return CellKey{net, np, dp, n}.label(); }

Outcome short_term_precision() {
    SweepConfig c = sweep_base("short_term");
    c.train_sizes = {20000};
    c.seeds = 20;
    const auto rep = run_sweep(c);
    const auto tau = samples(rep, "tau_lim");
    auto get = [&](Precision np, Precision dp) { return mean_std(tau.at(label(NetKind::Esn300, np, dp, 20000))); };
    const auto S = Precision::Single, D = Precision::Double;
    bool pass = true;
    std::string detail;
    for (auto dp : {S, D}) {
        const MeanStd s = get(S, dp), d = get(D, dp);
        const double se = std::sqrt(s.std * s.std / s.n + d.std * d.std / d.n);
        const bool ok = d.mean - s.mean > se;
        pass = pass && ok;
        detail += fmt("%s data: double net %.3f, single net %.3f, gap %.3f vs pooled SE %.3f (n=%zu/%zu); ",
                      std::string(to_string(dp)).c_str(), d.mean, s.mean, d.mean - s.mean, se, d.n, s.n);
    }
    const double ds = get(D, S).mean, sd = get(S, D).mean;
    pass = pass && ds > sd;
    detail += fmt("double net/single data %.3f > single net/double data %.3f", ds, sd);
    return {pass, detail + failures_of(rep)};
}

Outcome network_ranking() {
    SweepConfig c = sweep_base("ranking");
    c.train_sizes = {10000};
    c.seeds = 10;
    c.nets = {NetKind::Esn300, NetKind::Lstm64, NetKind::Tcn};
    c.net_precisions = {Precision::Double};
    c.data_precisions = {Precision::Double};
    const auto rep = run_sweep(c);
    const auto tau = samples(rep, "tau_lim");
    auto mean = [&](NetKind k) { return mean_std(tau.at(label(k, Precision::Double, Precision::Double, 10000))); };
    const MeanStd e = mean(NetKind::Esn300), l = mean(NetKind::Lstm64), t = mean(NetKind::Tcn);
    const bool pass = e.mean >= 1.1 * l.mean && e.mean >= 1.1 * t.mean && e.n >= 10;
    return {pass, fmt("double/double, 1e4 points: esn300 %.3f, lstm64 %.3f, tcn %.3f (n=%zu); need esn >= 1.1 x each",
                      e.mean, l.mean, t.mean, e.n) +
                      failures_of(rep)};
}

Outcome network_lyapunov() {
    auto run = [&](Precision p, const char* name) {
        SweepConfig c = sweep_base(name);
        c.train_sizes = {10000};
        c.seeds = 10;
        c.net_precisions = {p};
        c.data_precisions = {p};
        c.metrics = {"lyapunov"};
        c.lyapunov_steps = 50000;
        return run_sweep(c);
    };
    const auto dd = run(Precision::Double, "lyapunov_double");
    const auto ss = run(Precision::Single, "lyapunov_single");
    const std::string ld = label(NetKind::Esn300, Precision::Double, Precision::Double, 10000);
    const std::string ls = label(NetKind::Esn300, Precision::Single, Precision::Single, 10000);
    const auto l1 = samples(dd, "lambda1"), l2 = samples(dd, "lambda2"), l3 = samples(dd, "lambda3");
    const MeanStd m1 = mean_std(l1.at(ld)), m2 = mean_std(l2.at(ld)), m3 = mean_std(l3.at(ld));
    const bool spectrum = m1.n >= 10 && m1.mean >= 0.885 && m1.mean <= 0.915 && std::abs(m2.mean) < 1e-3 &&
                          m3.mean >= -12 && m3.mean <= -9.5;

    std::map<std::size_t, double> d1, s1;
    for (const auto& r : dd.rows)
        if (r.metric == "lambda1") d1[r.replicate] = r.value;
    for (const auto& r : ss.rows)
        if (r.metric == "lambda1") s1[r.replicate] = r.value;
    std::size_t lower = 0, matched = 0;
    for (const auto& [rep, v] : d1)
        if (s1.count(rep)) {
            ++matched;
            lower += s1.at(rep) < v;
        }
    const std::map<std::string, std::vector<double>> sl1 = samples(ss, "lambda1");
    const double smean = sl1.count(ls) ? mean_std(sl1.at(ls)).mean : NAN;
    const bool ordering = matched >= 10 && lower >= 7;
    return {spectrum && ordering,
            fmt("double/double mean (%.4f, %.2e, %.3f) over %zu seeds; single/single mean lambda1 %.4f, lower on %zu of "
                "%zu matched seeds (need 7 of 10)",
                m1.mean, m2.mean, m3.mean, m1.n, smean, lower, matched) +
                failures_of(dd) + failures_of(ss)};
}

Outcome one_step_consistency() {
    SweepConfig c = sweep_base("one_step");
    c.train_sizes = {20000};
    // Replicates whose closed loop diverges before the window have no one-step
    // error; 14 seeds leave >= 10 valid ones per cell.
    c.seeds = 14;
    c.metrics = {"one_step"};
    c.long_steps = 35000;
    c.one_step_start = 25000;
    c.one_step_count = 10000;
    const auto rep = run_sweep(c);
    const auto e = samples(rep, "one_step_mean");
    bool pass = true;
    std::string detail;
    for (auto dp : {Precision::Single, Precision::Double}) {
        const auto ds = e.find(label(NetKind::Esn300, Precision::Double, dp, 20000));
        const auto ss = e.find(label(NetKind::Esn300, Precision::Single, dp, 20000));
        if (ds == e.end() || ss == e.end()) return {false, "missing cells" + failures_of(rep)};
        const MeanStd d = mean_std(ds->second), s = mean_std(ss->second);
        const bool ok = d.n >= 10 && s.n >= 10 && d.mean * 5 <= s.mean;
        pass = pass && ok;
        detail += fmt("%s data: double net %.3e, single net %.3e, ratio %.1f (n=%zu/%zu); ",
                      std::string(to_string(dp)).c_str(), d.mean, s.mean, s.mean / d.mean, d.n, s.n);
    }
    return {pass, detail + "need ratio >= 5" + failures_of(rep)};
}

Outcome gradients() {
    const State3<double> ic = random_initial_condition(System::Lorenz, 3);
    // One training batch: 32 windows of 35 points.
    const std::vector<Trajectory<double>> trajs{integrate(ic, 35 + 31, 0.02, System::Lorenz)};
    const auto set = make_windows(trajs, 35);
    const GradientCheck l = gradient_check(init_lstm<double>(LstmShape{}, 5), set, 200);
    const GradientCheck t = gradient_check(init_tcn<double>(TcnShape{}, 5), set, 200);
    return {l.coordinates >= 200 && t.coordinates >= 200 && l.max_rel_error < 1e-4 && t.max_rel_error < 1e-4,
            fmt("lstm64 max rel error %.2e over %zu coordinates, tcn %.2e over %zu; bound 1e-4", l.max_rel_error,
                l.coordinates, t.max_rel_error, t.coordinates)};
}

Outcome oracles() {
    CounterRng rng(42);
    std::normal_distribution<double> g;
    auto gauss = [&](Eigen::Index r, Eigen::Index c) {
        Mat<double> m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
        return m;
    };

    // Ridge against the normal equations solved by full-pivot LU.
    const Mat<double> X = gauss(5, 60), Y = gauss(3, 60);
    const double beta = 1e-3;
    const Mat<double> A = X * X.transpose() + beta * Mat<double>::Identity(5, 5);
    const Mat<double> want = Eigen::FullPivLU<Mat<double>>(A).solve(X * Y.transpose()).transpose();
    const double ridge_err = (solve_ridge(X, Y, beta) - want).norm() / want.norm();

    // Spectral radius against the dense eigensolver, on Gaussian draws and a reservoir.
    double rho_err = 0;
    std::vector<Mat<double>> ms{gauss(50, 50), gauss(50, 50), init_esn<double>(EsnConfig{}).W};
    for (const auto& m : ms) {
        const double ref = Eigen::EigenSolver<Mat<double>>(m, false).eigenvalues().cwiseAbs().maxCoeff();
        rho_err = std::max(rho_err, std::abs(spectral_radius(m).value - ref) / ref);
    }

    // TCN causality: perturbing input column j never moves outputs before j.
    const auto tcn = init_tcn<double>(TcnShape{}, 9);
    const Mat<double> u = gauss(3, 35);
    const Mat<double> base = tcn_stack(tcn, u);
    double leak = 0;
    for (Eigen::Index j = 1; j < 35; ++j) {
        Mat<double> p = u;
        p.col(j).array() += 1.0;
        leak = std::max(leak, (tcn_stack(tcn, p).leftCols(j) - base.leftCols(j)).cwiseAbs().maxCoeff());
    }
    return {ridge_err < 1e-10 && rho_err < 1e-6 && leak == 0.0,
            fmt("ridge rel error %.2e (< 1e-10), spectral radius rel error %.2e (< 1e-6), tcn causal leak %g (== 0)",
                ridge_err, rho_err, leak)};
}

Outcome parameter_counts() {
    const auto e3 = param_counts(NetKind::Esn300), e2 = param_counts(NetKind::Esn200), l = param_counts(NetKind::Lstm64);
    return {e3.trainable == 912 && e2.trainable == 612 && l.trainable == 17603,
            fmt("esn300 %zu (total %zu), esn200 %zu (total %zu), lstm64 %zu, tcn %zu", e3.trainable, e3.total,
                e2.trainable, e2.total, l.trainable, param_counts(NetKind::Tcn).trainable)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"RK4 order", rk4_order},
        {"ODE Lyapunov spectra", ode_lyapunov},
        {"divergence time vs precision", divergence_ratio},
        {"return-map fidelity", return_map_fidelity},
        {"short-term precision ordering", short_term_precision},
        {"network ranking", network_ranking},
        {"network Lyapunov spectrum", network_lyapunov},
        {"one-step consistency", one_step_consistency},
        {"gradient correctness", gradients},
        {"oracle equivalences", oracles},
        {"parameter counts", parameter_counts},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
    std::filesystem::remove_all(kWork);

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s  %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::filesystem::remove_all(kWork);
    return failed == 0 ? 0 : 1;
}
