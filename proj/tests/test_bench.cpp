#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "chaosbench/analysis.hpp"
#include "chaosbench/bench.hpp"

using namespace chaosbench;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

std::string fresh_dir(const std::string& name) {
    fs::remove_all(name);
    return name;
}

SweepConfig small_sweep(const std::string& dir) {
    SweepConfig c;
    c.train_sizes = {1500};
    c.seeds = 2;
    c.horizon = 300;
    c.output_dir = dir;
    c.use_cache = false;
    return c;
}

double value_of(const ExperimentReport& r, const CellKey& cell, std::size_t rep, const std::string& metric) {
    for (const auto& row : r.rows)
        if (row.cell == cell && row.replicate == rep && row.metric == metric) return row.value;
    FAIL("missing row");
    return 0;
}

}  // namespace

TEST_CASE("dataset generation") {
    SUBCASE("zero steps give one point") {
        GenerateOptions g;
        g.n_traj = 1;
        g.n_steps = 0;
        const auto files = generate_dataset(g, fresh_dir("gen_zero"));
        REQUIRE(files.size() == 1);
        const auto t = load_trajectory(files[0]);
        CHECK(std::visit([](const auto& x) { return x.size(); }, t) == 1);
    }
    SUBCASE("default length, precision header and determinism") {
        GenerateOptions g;
        g.n_traj = 3;
        g.precision = Precision::Single;
        g.seed = 5;
        const auto a = generate_dataset(g, fresh_dir("gen_a"));
        const auto b = generate_dataset(g, fresh_dir("gen_b"));
        REQUIRE(a.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(fs::path(a[i]).filename() == "lorenz_single_" + std::to_string(i) + ".traj");
            const std::string header = first_line(a[i]);
            CHECK(header.find(" 50000 single ") != std::string::npos);
            const auto t = load_trajectory(a[i]);
            CHECK(precision_of_any(t) == Precision::Single);
            CHECK(std::get<Trajectory<float>>(t).size() == 50001);
            CHECK(slurp(a[i]) == slurp(b[i]));
        }
        CHECK(slurp(a[0]) != slurp(a[1]));
    }
    SUBCASE("initial conditions are on the attractor") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto ic = random_initial_condition(System::Lorenz, s);
            CHECK(std::abs(ic.x) < 25);
            CHECK(ic.z > 0);
            CHECK(ic.z < 50);
        }
    }
}

TEST_CASE("parameter counts from the architecture") {
    CHECK(param_counts(NetKind::Esn300).trainable == 912);
    CHECK(param_counts(NetKind::Esn200).trainable == 612);
    CHECK(param_counts(NetKind::Lstm64).trainable == 17603);
    CHECK(param_counts(NetKind::Tcn).trainable == 50243);
    const auto e = param_counts(NetKind::Esn300, {}, 0);
    const auto m = init_esn<double>(EsnConfig{});
    CHECK(e.total == 912 + static_cast<std::size_t>((m.W.array() != 0.0).count() + (m.W_in.array() != 0.0).count()));
    CHECK(param_counts(NetKind::Lstm64).total == 17603);
}

TEST_CASE("sweep config text") {
    SweepConfig c;
    c.system = System::Rossler;
    c.dt = 0.01;
    c.nets = {NetKind::Esn200, NetKind::Tcn};
    c.metrics = {"tau_lim", "lyapunov"};
    c.net.esn.leak = 0.5;
    c.net.esn.ridge_beta = 1e-6;
    c.net.train.epochs = 3;
    const SweepConfig back = parse_sweep_config(sweep_config_json(c));
    CHECK(back.system == System::Rossler);
    CHECK(back.dt == 0.01);
    CHECK(back.nets == c.nets);
    CHECK(back.metrics == c.metrics);
    CHECK(back.net.esn.leak == 0.5);
    CHECK(back.net.esn.ridge_beta == std::optional<double>(1e-6));
    CHECK(back.net.train.epochs == 3);
    CHECK(sweep_config_json(back) == sweep_config_json(c));

    CHECK_THROWS(parse_sweep_config(R"({"seedz": 3})"));
    CHECK_THROWS(parse_sweep_config(R"({"esn": {"leek": 0.3}})"));
    CHECK_THROWS(parse_sweep_config(R"({"seeds": 0})"));
    CHECK_THROWS(parse_sweep_config(R"({"nets": []})"));
    CHECK_THROWS(parse_sweep_config(R"({"metrics": ["fractal_dimension"]})"));
    CHECK_THROWS(parse_sweep_config(R"({"dt": -0.02})"));
    CHECK_THROWS(parse_sweep_config("{"));
}

TEST_CASE("cell seeds ignore precision and separate replicates") {
    const SweepConfig c;
    CHECK(data_seed(c, 1000, 0) != data_seed(c, 1000, 1));
    CHECK(data_seed(c, 1000, 0) != data_seed(c, 2000, 0));
    CHECK(network_seed(c, NetKind::Esn300, 1000, 0) != network_seed(c, NetKind::Tcn, 1000, 0));
    SweepConfig other = c;
    other.master_seed = 1;
    CHECK(data_seed(c, 1000, 0) != data_seed(other, 1000, 0));
}

TEST_CASE("one cell, one seed, tau only") {
    SweepConfig c = small_sweep(fresh_dir("sweep_one"));
    c.seeds = 1;
    c.net_precisions = {Precision::Double};
    c.data_precisions = {Precision::Double};
    const auto rep = run_sweep(c);
    CHECK(rep.ok());
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].metric == "tau_lim");
    CHECK(rep.rows[0].value > 0);
    CHECK(rep.rows[0].wall_seconds > 0);
}

TEST_CASE("parallel and serial sweeps agree") {
    SweepConfig c = small_sweep(fresh_dir("sweep_serial"));
    c.metrics = {"tau_lim", "lyapunov"};
    c.lyapunov_steps = 500;
    const auto serial = run_sweep(c);
    c.workers = 2;
    c.output_dir = fresh_dir("sweep_parallel");
    const auto parallel = run_sweep(c);
    // Each task yields tau_lim and three exponents unless its closed loop diverges.
    for (const auto& f : serial.failures) CHECK(f.reason.find("lyapunov") == 0);
    REQUIRE(serial.rows.size() + 3 * serial.failures.size() == 2 * 4 * 4);
    REQUIRE(parallel.failures.size() == serial.failures.size());
    REQUIRE(parallel.rows.size() == serial.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].cell == parallel.rows[i].cell);
        CHECK(serial.rows[i].replicate == parallel.rows[i].replicate);
        CHECK(serial.rows[i].metric == parallel.rows[i].metric);
        CHECK(serial.rows[i].value == parallel.rows[i].value);
    }
}

TEST_CASE("rerunning a cached sweep recomputes nothing") {
    SweepConfig c = small_sweep(fresh_dir("sweep_cache"));
    c.use_cache = true;
    const auto first = run_sweep(c);
    const auto t0 = std::chrono::steady_clock::now();
    const auto second = run_sweep(c);
    const double rerun = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(first.rows.size() == second.rows.size());
    for (std::size_t i = 0; i < first.rows.size(); ++i) CHECK(first.rows[i].value == second.rows[i].value);
    double train = 0;
    for (const auto& r : first.rows) train += r.wall_seconds;
    CHECK(rerun < 0.2 * train);
}

TEST_CASE("rows carry the precisions of the data and the model") {
    const SweepConfig c = small_sweep("unused");
    for (auto dp : {Precision::Single, Precision::Double}) {
        const auto data = generate_trajectory(c.system, 200, c.dt, dp, data_seed(c, 201, 0));
        CHECK(precision_of_any(data) == dp);
        for (auto np : {Precision::Single, Precision::Double}) {
            const auto net = train_network(NetKind::Esn200, np, {data}, 1).net;
            CHECK(net_precision(net) == np);
            std::stringstream ss;
            save_network(ss, net);
            CHECK(net_precision(load_network(ss)) == np);
        }
    }
}

TEST_CASE("one_step window may end at long_steps") {
    SweepConfig c = small_sweep(fresh_dir("sweep_one_step_edge"));
    c.seeds = 1;
    c.net_precisions = {Precision::Double};
    c.data_precisions = {Precision::Double};
    c.metrics = {"one_step"};
    c.long_steps = 3000;
    c.one_step_start = 1000;
    c.one_step_count = 2000;
    const auto rep = run_sweep(c);
    CHECK(rep.failures.empty());
    const CellKey cell{NetKind::Esn300, Precision::Double, Precision::Double, 1500};
    CHECK(value_of(rep, cell, 0, "one_step_mean") > 0);
}

TEST_CASE("report files") {
    CHECK_THROWS(write_report(ExperimentReport{}, fresh_dir("report_empty")));
    CHECK_FALSE(fs::exists("report_empty"));

    SweepConfig c = small_sweep(fresh_dir("sweep_report"));
    c.net_precisions = {Precision::Double};
    c.data_precisions = {Precision::Double};
    c.metrics = {"tau_lim", "return_map", "one_step", "divergence", "train_time"};
    c.long_steps = 12000;
    c.one_step_start = 2000;
    c.one_step_count = 5000;
    c.reference_steps = 200000;
    const auto rep = run_sweep(c);
    CHECK(rep.ok());
    const auto files = write_report(rep, c.output_dir);
    auto has = [&](const std::string& name) {
        return std::find(files.begin(), files.end(), (fs::path(c.output_dir) / name).string()) != files.end();
    };
    for (auto name : {"rows.csv", "tau_lim.csv", "xi.csv", "one_step_mean.csv", "train_seconds.csv",
                      "tau_vs_train_size.plot", "xi_vs_train_size.plot", "one_step_vs_train_size.plot",
                      "train_time.plot", "return_map.plot", "divergence.plot", "divergence.csv"})
        CHECK_MESSAGE(has(name), name);

    const std::string dir = c.output_dir + "/";
    CHECK(first_line(dir + "tau_lim.csv") == "net,net_prec,data_prec,train_size,mean_tau,std_tau,n_seeds");
    CHECK(first_line(dir + "rows.csv") == "system,net,net_prec,data_prec,train_size,replicate,seed,metric,value,wall_seconds");

    // The scatter file holds one pair per consecutive maxima of the first replicate.
    const CellKey cell{NetKind::Esn300, Precision::Double, Precision::Double, 1500};
    const auto data = generate_trajectory(c.system, 1499, c.dt, Precision::Double, data_seed(c, 1500, 0));
    const auto net = train_network(NetKind::Esn300, Precision::Double, {data}, network_seed(c, NetKind::Esn300, 1500, 0)).net;
    const auto pred = predict_network(net, data, c.long_steps);
    const std::size_t maxima = std::visit([](const auto& p) { return extract_maxima(p).size(); }, pred);
    std::ifstream scatter(dir + "return_map_" + cell.label() + ".csv");
    REQUIRE(scatter);
    std::size_t lines = 0;
    for (std::string line; std::getline(scatter, line);) ++lines;
    CHECK(lines - 1 == maxima - 1);

    const auto back = read_report_rows(dir + "rows.csv");
    REQUIRE(back.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(back.rows[i].cell == rep.rows[i].cell);
        CHECK(back.rows[i].value == rep.rows[i].value);
    }
    CHECK(value_of(back, cell, 1, "tau_lim") == value_of(rep, cell, 1, "tau_lim"));

    const auto agg = aggregate(rep.rows);
    for (const auto& a : agg) {
        CHECK(a.n == 2);
        CHECK(std::isfinite(a.std));
    }
    ExperimentReport one;
    one.rows = {rep.rows.front()};
    CHECK(std::isnan(aggregate(one.rows).front().std));
}
