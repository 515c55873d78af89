// chaosbench command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "chaosbench/analysis.hpp"
#include "chaosbench/bench.hpp"
#include "chaosbench/dynamics.hpp"
#include "chaosbench/network.hpp"

using namespace chaosbench;

namespace {

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

AnyNet read_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model '" + path + "'");
    return load_network(in);
}

NetOptions options_from(const std::string& config_path) {
    return config_path.empty() ? NetOptions{} : load_sweep_config(config_path).net;
}

void print_spectrum(const LyapunovSpectrum& ly) {
    std::printf("lambda1 %.6g\nlambda2 %.6g\nlambda3 %.6g\nsum %.6g\n", ly.lambdas[0], ly.lambdas[1], ly.lambdas[2],
                ly.sum());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Precision benchmarks for chaotic-dynamics forecasters"};
    app.require_subcommand(1);

    // generate
    GenerateOptions gen;
    std::string gen_system = "lorenz", gen_prec = "double", gen_out = "data";
    auto* g = app.add_subcommand("generate", "Write on-attractor RK4 trajectories");
    g->add_option("--system", gen_system, "lorenz | rossler")->capture_default_str();
    g->add_option("--n-traj", gen.n_traj, "Number of trajectory files")->capture_default_str();
    g->add_option("--n-steps", gen.n_steps, "RK4 steps per trajectory (points = steps + 1)")->capture_default_str();
    g->add_option("--dt", gen.dt, "Time step")->capture_default_str();
    g->add_option("--precision", gen_prec, "single | double | extended")->capture_default_str();
    g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
    g->add_option("--burn-in", gen.burn_in, "Discarded steps before recording")->capture_default_str();
    g->add_option("--out", gen_out, "Output directory")->capture_default_str();

    // train
    std::string tr_net = "esn300", tr_prec = "double", tr_out = "model.txt", tr_config;
    std::vector<std::string> tr_data;
    std::uint64_t tr_seed = 0;
    auto* t = app.add_subcommand("train", "Train a network on trajectory files");
    t->add_option("--net", tr_net, "esn200 | esn300 | lstm64 | tcn")->capture_default_str();
    t->add_option("--precision", tr_prec, "Network precision: single | double")->capture_default_str();
    t->add_option("--data", tr_data, "Trajectory files")->required();
    t->add_option("--seed", tr_seed, "Initialization seed")->capture_default_str();
    t->add_option("--config", tr_config, "Sweep config whose esn/lstm/tcn/train sections override the defaults");
    t->add_option("--out", tr_out, "Model file")->capture_default_str();

    // predict
    std::string pr_model, pr_warm, pr_out = "prediction.traj";
    std::size_t pr_steps = 1000;
    auto* p = app.add_subcommand("predict", "Closed-loop prediction after a warm-up trajectory");
    p->add_option("--model", pr_model, "Model file")->required();
    p->add_option("--warm", pr_warm, "Warm-up trajectory file")->required();
    p->add_option("--steps", pr_steps, "Predicted points")->capture_default_str();
    p->add_option("--out", pr_out, "Output trajectory file")->capture_default_str();

    // analyze
    std::string an_metric, an_pred, an_ref, an_model, an_system = "lorenz", an_prec = "double", an_net = "esn300";
    double an_dt = 0.02, an_threshold = 0.05;
    std::size_t an_steps = 100000, an_start = 25000, an_count = 10000;
    std::uint64_t an_seed = 0;
    auto* a = app.add_subcommand("analyze", "Metrics on trajectories and models");
    a->add_option("--metric", an_metric,
                  "tau_lim | return_map | divergence | one_step | lyapunov | lyapunov_net | params")
        ->required();
    a->add_option("--pred", an_pred, "Predicted (or test) trajectory");
    a->add_option("--ref", an_ref, "Reference trajectory");
    a->add_option("--model", an_model, "Model file (lyapunov_net)");
    a->add_option("--system", an_system, "System for lyapunov / one_step")->capture_default_str();
    a->add_option("--precision", an_prec, "Integration precision for lyapunov")->capture_default_str();
    a->add_option("--net", an_net, "Network for params")->capture_default_str();
    a->add_option("--dt", an_dt, "Time step for lyapunov")->capture_default_str();
    a->add_option("--steps", an_steps, "Steps for lyapunov / lyapunov_net")->capture_default_str();
    a->add_option("--threshold", an_threshold, "tau_lim threshold relative to the attractor RMS norm")
        ->capture_default_str();
    a->add_option("--start", an_start, "one_step window start")->capture_default_str();
    a->add_option("--count", an_count, "one_step window length")->capture_default_str();
    a->add_option("--seed", an_seed, "Seed for params (ESN nonzero count)")->capture_default_str();

    // sweep
    std::string sw_config, sw_out;
    std::size_t sw_seeds = 0, sw_workers = 0;
    auto* s = app.add_subcommand("sweep", "Run a precision sweep and write its report");
    s->add_option("--config", sw_config, "JSON sweep config")->required();
    s->add_option("--seeds", sw_seeds, "Override the seed count");
    s->add_option("--workers", sw_workers, "Override the worker count");
    s->add_option("--out", sw_out, "Override the output directory");

    // report
    std::string rp_rows, rp_out = "report";
    auto* r = app.add_subcommand("report", "Rebuild aggregate CSVs and plot descriptions from rows.csv");
    r->add_option("--rows", rp_rows, "rows.csv written by a sweep")->required();
    r->add_option("--out", rp_out, "Output directory")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    if (*g)
        return guarded([&] {
            gen.system = parse_system(gen_system);
            gen.precision = parse_precision(gen_prec);
            for (const auto& path : generate_dataset(gen, gen_out)) std::cout << path << '\n';
            return 0;
        });

    if (*t)
        return guarded([&] {
            std::vector<AnyTrajectory> data;
            for (const auto& f : tr_data) data.push_back(load_trajectory(f));
            const TrainedNet trained =
                train_network(parse_net_kind(tr_net), parse_precision(tr_prec), data, tr_seed, options_from(tr_config));
            std::ofstream out(tr_out);
            save_network(out, trained.net);
            if (!out) throw std::runtime_error("cannot write '" + tr_out + "'");
            const ParamCounts pc = param_counts(trained.net);
            std::cout << "model " << tr_out << "\ntrainable " << pc.trainable << "\ntotal " << pc.total << '\n';
            for (std::size_t e = 0; e < trained.epoch_loss.size(); ++e)
                std::cout << "epoch " << e + 1 << " loss " << trained.epoch_loss[e] << '\n';
            return 0;
        });

    if (*p)
        return guarded([&] {
            const AnyNet net = read_model(pr_model);
            save_trajectory(pr_out, predict_network(net, load_trajectory(pr_warm), pr_steps));
            std::cout << pr_out << '\n';
            return 0;
        });

    if (*a)
        return guarded([&] {
            auto need = [](const std::string& v, const char* flag) {
                if (v.empty()) throw std::invalid_argument(std::string("--metric needs ") + flag);
                return load_trajectory(v);
            };
            if (an_metric == "tau_lim") {
                const auto pred = need(an_pred, "--pred"), ref = need(an_ref, "--ref");
                const double tau =
                    std::visit([&](const auto& x, const auto& y) { return tau_lim(x, y, an_threshold); }, pred, ref);
                std::printf("tau_lim %.6g\n", tau);
            } else if (an_metric == "divergence") {
                const auto pred = need(an_pred, "--pred"), ref = need(an_ref, "--ref");
                const auto series =
                    std::visit([](const auto& x, const auto& y) { return divergence_series(x, y); }, pred, ref);
                std::printf("t,distance\n");
                for (const auto& pt : series) std::printf("%.17g,%.17g\n", pt.t, pt.distance);
            } else if (an_metric == "return_map") {
                const auto pred = need(an_pred, "--pred");
                const auto ref = an_ref.empty() ? pred : load_trajectory(an_ref);
                auto maxima = [](const AnyTrajectory& x) {
                    return std::visit([](const auto& y) { return extract_maxima(y); }, x);
                };
                const ReturnMap rm = make_return_map(maxima(pred));
                const ReturnMapFit fit = fit_return_map(make_return_map(maxima(ref)));
                std::printf("pairs %zu\ncusp %.6g\nxi %.6g\n", rm.pairs.size(), fit.cusp, return_map_error(rm, fit));
            } else if (an_metric == "one_step") {
                const auto pred = need(an_pred, "--pred");
                const auto field = default_field<DDouble>(parse_system(an_system));
                const MeanStd ms =
                    std::visit([&](const auto& x) { return one_step_error(x, field, an_start, an_count); }, pred);
                std::printf("mean %.6g\nstd %.6g\nn %zu\n", ms.mean, ms.std, ms.n);
            } else if (an_metric == "lyapunov") {
                const System sys = parse_system(an_system);
                visit_net_precision(parse_precision(an_prec), [&]<class T>(std::type_identity<T>) {
                    const State3<double> ic = random_initial_condition(sys, an_seed, an_dt);
                    print_spectrum(
                        lyapunov_ode(default_field<T>(sys), convert<T>(ic), from_decimal<T>(an_dt), an_steps));
                });
            } else if (an_metric == "lyapunov_net") {
                if (an_model.empty()) throw std::invalid_argument("--metric lyapunov_net needs --model");
                print_spectrum(lyapunov_network(read_model(an_model), need(an_ref, "--ref (warm-up)"), an_steps));
            } else if (an_metric == "params") {
                const ParamCounts pc = param_counts(parse_net_kind(an_net), {}, an_seed);
                std::printf("trainable %zu\ntotal %zu\n", pc.trainable, pc.total);
            } else {
                throw std::invalid_argument("unknown metric '" + an_metric + "'");
            }
            return 0;
        });

    if (*s)
        return guarded([&] {
            SweepConfig cfg = load_sweep_config(sw_config);
            if (sw_seeds) cfg.seeds = sw_seeds;
            if (sw_workers) cfg.workers = sw_workers;
            if (!sw_out.empty()) cfg.output_dir = sw_out;
            const ExperimentReport rep = run_sweep(cfg);
            for (const auto& path : write_report(rep, cfg.output_dir)) std::cout << path << '\n';
            for (const auto& f : rep.failures)
                std::cerr << "failed " << f.cell.label() << " replicate " << f.replicate << ": " << f.reason << '\n';
            return rep.ok() ? 0 : 2;
        });

    if (*r)
        return guarded([&] {
            for (const auto& path : write_report(read_report_rows(rp_rows), rp_out)) std::cout << path << '\n';
            return 0;
        });

    return 0;
}
