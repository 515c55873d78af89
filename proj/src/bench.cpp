#include "chaosbench/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "chaosbench/analysis.hpp"
#include "chaosbench/rng.hpp"

namespace chaosbench {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Datasets

State3<double> random_initial_condition(System system, std::uint64_t seed, double dt, std::size_t burn_in) {
    CounterRng rng(seed);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    State3<double> s = system == System::Lorenz ? State3<double>{in(-15, 15), in(-15, 15), in(5, 40)}
                                                : State3<double>{in(-10, 10), in(-10, 10), in(0, 1)};
    return advance(s, burn_in, from_decimal<double>(dt), default_field<double>(system));
}

AnyTrajectory generate_trajectory(System system, std::size_t n_steps, double dt, Precision p, std::uint64_t seed,
                                  std::size_t burn_in) {
    const State3<double> ic = random_initial_condition(system, seed, dt, burn_in);
    return visit_precision(p, [&]<class T>(std::type_identity<T>) -> AnyTrajectory {
        Trajectory<T> t = integrate(convert<T>(ic), n_steps, from_decimal<T>(dt), system);
        t.seed = seed;
        t.provenance = "rk4";
        return t;
    });
}

std::vector<std::string> generate_dataset(const GenerateOptions& opt, const std::string& out_dir) {
    if (opt.n_traj == 0) throw std::invalid_argument("generate_dataset: n_traj must be >= 1");
    if (!(opt.dt > 0.0)) throw std::invalid_argument("generate_dataset: dt must be > 0");
    fs::create_directories(out_dir);
    std::vector<std::string> paths;
    const int width = static_cast<int>(std::to_string(opt.n_traj - 1).size());
    for (std::size_t i = 0; i < opt.n_traj; ++i) {
        std::ostringstream name;
        name << to_string(opt.system) << '_' << to_string(opt.precision) << '_' << std::setw(width)
             << std::setfill('0') << i << ".traj";
        const std::string path = (fs::path(out_dir) / name.str()).string();
        save_trajectory(path, generate_trajectory(opt.system, opt.n_steps, opt.dt, opt.precision,
                                                  derive_key(opt.seed, {i}), opt.burn_in));
        paths.push_back(path);
    }
    return paths;
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::vector<std::string> kMetrics{"tau_lim", "return_map", "lyapunov", "one_step", "divergence", "train_time"};

bool wants(const SweepConfig& cfg, const std::string& metric) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), metric) != cfg.metrics.end();
}

json esn_json(const EsnConfig& c) {
    json j{{"leak", c.leak},
           {"spectral_radius", c.spectral_radius},
           {"input_density", c.input_density},
           {"input_std", c.input_std},
           {"reservoir_density", c.reservoir_density},
           {"reservoir_std", c.reservoir_std},
           {"offset", c.offset},
           {"noise_std", c.noise_std},
           {"washout", c.washout},
           {"input_scale", c.input_scale}};
    j["ridge_beta"] = c.ridge_beta ? json(*c.ridge_beta) : json(nullptr);
    return j;
}

json train_json(const TrainConfig& c) {
    return {{"batch", c.batch},   {"epochs", c.epochs},     {"lr", c.lr},
            {"beta1", c.beta1},   {"beta2", c.beta2},       {"adam_eps", c.adam_eps},
            {"lr_decay", c.lr_decay}};
}

json tcn_json(const TcnShape& s) {
    return {{"kernel", s.kernel}, {"dilations", s.dilations}, {"width", s.width}, {"window", s.window},
            {"scale", s.scale}};
}

json lstm_json(const LstmShape& s) {
    return {{"window", s.window}, {"scale", s.scale}};
}

template <class F>
void for_keys(const json& j, const std::string& where, F&& f) {
    if (!j.is_object()) throw std::invalid_argument("sweep config: '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!f(it.key(), it.value())) throw std::invalid_argument("sweep config: unknown key '" + where + it.key() + "'");
}

}  // namespace

void SweepConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("sweep: dt must be > 0");
    if (train_sizes.empty() || nets.empty() || net_precisions.empty() || data_precisions.empty() || metrics.empty())
        throw std::invalid_argument("sweep: train_sizes, nets, precisions and metrics must be nonempty");
    if (seeds < 1) throw std::invalid_argument("sweep: seeds must be >= 1");
    if (workers < 1) throw std::invalid_argument("sweep: workers must be >= 1");
    for (auto p : net_precisions)
        if (p == Precision::Extended) throw std::invalid_argument("sweep: network precision must be single or double");
    for (auto p : data_precisions)
        if (p == Precision::Extended) throw std::invalid_argument("sweep: data precision must be single or double");
    for (const auto& m : metrics)
        if (std::find(kMetrics.begin(), kMetrics.end(), m) == kMetrics.end())
            throw std::invalid_argument("sweep: unknown metric '" + m + "'");
    for (auto n : train_sizes)
        if (n < 2) throw std::invalid_argument("sweep: train sizes must be >= 2 points");
    if (wants(*this, "one_step") && one_step_start + one_step_count > long_steps)
        throw std::invalid_argument("sweep: one_step window exceeds long_steps");
}

std::string sweep_config_json(const SweepConfig& cfg) {
    json j;
    j["system"] = std::string(to_string(cfg.system));
    j["dt"] = cfg.dt;
    j["train_sizes"] = cfg.train_sizes;
    std::vector<std::string> nets, np, dp;
    for (auto n : cfg.nets) nets.emplace_back(to_string(n));
    for (auto p : cfg.net_precisions) np.emplace_back(to_string(p));
    for (auto p : cfg.data_precisions) dp.emplace_back(to_string(p));
    j["nets"] = nets;
    j["net_precisions"] = np;
    j["data_precisions"] = dp;
    j["seeds"] = cfg.seeds;
    j["metrics"] = cfg.metrics;
    j["output_dir"] = cfg.output_dir;
    j["workers"] = cfg.workers;
    j["master_seed"] = cfg.master_seed;
    j["horizon"] = cfg.horizon;
    j["tau_threshold"] = cfg.tau_threshold;
    j["long_steps"] = cfg.long_steps;
    j["lyapunov_steps"] = cfg.lyapunov_steps;
    j["one_step_start"] = cfg.one_step_start;
    j["one_step_count"] = cfg.one_step_count;
    j["reference_steps"] = cfg.reference_steps;
    j["use_cache"] = cfg.use_cache;
    j["esn"] = esn_json(cfg.net.esn);
    j["lstm"] = lstm_json(cfg.net.lstm);
    j["tcn"] = tcn_json(cfg.net.tcn);
    j["train"] = train_json(cfg.net.train);
    return j.dump(2);
}

SweepConfig parse_sweep_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    SweepConfig c;
    for_keys(j, "", [&](const std::string& k, const json& v) {
        if (k == "system") c.system = parse_system(v.get<std::string>());
        else if (k == "dt") c.dt = v.get<double>();
        else if (k == "train_sizes") c.train_sizes = v.get<std::vector<std::size_t>>();
        else if (k == "nets") {
            c.nets.clear();
            for (const auto& s : v) c.nets.push_back(parse_net_kind(s.get<std::string>()));
        } else if (k == "net_precisions" || k == "data_precisions") {
            auto& dst = k == "net_precisions" ? c.net_precisions : c.data_precisions;
            dst.clear();
            for (const auto& s : v) dst.push_back(parse_precision(s.get<std::string>()));
        } else if (k == "seeds") c.seeds = v.get<std::size_t>();
        else if (k == "metrics") c.metrics = v.get<std::vector<std::string>>();
        else if (k == "output_dir") c.output_dir = v.get<std::string>();
        else if (k == "workers") c.workers = v.get<std::size_t>();
        else if (k == "master_seed") c.master_seed = v.get<std::uint64_t>();
        else if (k == "horizon") c.horizon = v.get<std::size_t>();
        else if (k == "tau_threshold") c.tau_threshold = v.get<double>();
        else if (k == "long_steps") c.long_steps = v.get<std::size_t>();
        else if (k == "lyapunov_steps") c.lyapunov_steps = v.get<std::size_t>();
        else if (k == "one_step_start") c.one_step_start = v.get<std::size_t>();
        else if (k == "one_step_count") c.one_step_count = v.get<std::size_t>();
        else if (k == "reference_steps") c.reference_steps = v.get<std::size_t>();
        else if (k == "use_cache") c.use_cache = v.get<bool>();
        else if (k == "esn") {
            auto& e = c.net.esn;
            for_keys(v, "esn.", [&](const std::string& ek, const json& ev) {
                if (ek == "leak") e.leak = ev.get<double>();
                else if (ek == "spectral_radius") e.spectral_radius = ev.get<double>();
                else if (ek == "input_density") e.input_density = ev.get<double>();
                else if (ek == "input_std") e.input_std = ev.get<double>();
                else if (ek == "reservoir_density") e.reservoir_density = ev.get<double>();
                else if (ek == "reservoir_std") e.reservoir_std = ev.get<double>();
                else if (ek == "offset") e.offset = ev.get<double>();
                else if (ek == "noise_std") e.noise_std = ev.get<double>();
                else if (ek == "washout") e.washout = ev.get<std::size_t>();
                else if (ek == "input_scale") e.input_scale = ev.get<double>();
                else if (ek == "ridge_beta") {
                    if (ev.is_null()) e.ridge_beta.reset();
                    else e.ridge_beta = ev.get<double>();
                } else return false;
                return true;
            });
        } else if (k == "lstm") {
            for_keys(v, "lstm.", [&](const std::string& lk, const json& lv) {
                if (lk == "window") c.net.lstm.window = lv.get<std::size_t>();
                else if (lk == "scale") c.net.lstm.scale = lv.get<double>();
                else return false;
                return true;
            });
        } else if (k == "tcn") {
            auto& t = c.net.tcn;
            for_keys(v, "tcn.", [&](const std::string& tk, const json& tv) {
                if (tk == "kernel") t.kernel = tv.get<std::size_t>();
                else if (tk == "dilations") t.dilations = tv.get<std::vector<std::size_t>>();
                else if (tk == "width") t.width = tv.get<std::size_t>();
                else if (tk == "window") t.window = tv.get<std::size_t>();
                else if (tk == "scale") t.scale = tv.get<double>();
                else return false;
                return true;
            });
        } else if (k == "train") {
            auto& t = c.net.train;
            for_keys(v, "train.", [&](const std::string& tk, const json& tv) {
                if (tk == "batch") t.batch = tv.get<std::size_t>();
                else if (tk == "epochs") t.epochs = tv.get<std::size_t>();
                else if (tk == "lr") t.lr = tv.get<double>();
                else if (tk == "beta1") t.beta1 = tv.get<double>();
                else if (tk == "beta2") t.beta2 = tv.get<double>();
                else if (tk == "adam_eps") t.adam_eps = tv.get<double>();
                else if (tk == "lr_decay") t.lr_decay = tv.get<double>();
                else return false;
                return true;
            });
        } else {
            return false;
        }
        return true;
    });
    c.validate();
    return c;
}

SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sweep config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sweep_config(ss.str());
}

// ---------------------------------------------------------------------------
// Seeds

std::string CellKey::label() const {
    return std::string(to_string(net)) + "_net" + std::string(to_string(net_precision)) + "_data" +
           std::string(to_string(data_precision)) + "_n" + std::to_string(train_size);
}

std::uint64_t data_seed(const SweepConfig& cfg, std::size_t train_size, std::size_t replicate) {
    return derive_key(cfg.master_seed, {0xda7au, static_cast<std::uint64_t>(cfg.system), std::bit_cast<std::uint64_t>(cfg.dt),
                                        train_size, replicate});
}

std::uint64_t network_seed(const SweepConfig& cfg, NetKind net, std::size_t train_size, std::size_t replicate) {
    return derive_key(cfg.master_seed, {0x7e7u, static_cast<std::uint64_t>(net), train_size, replicate});
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct Task {
    CellKey cell;
    std::size_t replicate = 0;
};

struct TaskResult {
    std::vector<ReportRow> rows;
    std::vector<std::string> failures;
    std::vector<std::pair<double, double>> scatter;
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Everything that changes a task's numbers, minus the cell lists, seed count
// and bookkeeping fields.
std::uint64_t config_fingerprint(const SweepConfig& cfg) {
    json j = json::parse(sweep_config_json(cfg));
    for (const char* k : {"train_sizes", "nets", "net_precisions", "data_precisions", "seeds", "output_dir", "workers",
                          "use_cache"})
        j.erase(k);
    return fnv1a(j.dump());
}

std::string cache_path(const SweepConfig& cfg, std::uint64_t fingerprint, const Task& t) {
    std::ostringstream name;
    name << std::hex << fingerprint << '_' << t.cell.label() << "_r" << std::dec << t.replicate << ".txt";
    return (fs::path(cfg.output_dir) / "cache" / name.str()).string();
}

void write_cache(const std::string& path, const TaskResult& r) {
    fs::create_directories(fs::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        for (const auto& row : r.rows)
            out << "row " << row.metric << ' ' << format_real(row.value) << ' ' << format_real(row.wall_seconds)
                << '\n';
        for (const auto& f : r.failures) out << "fail " << f << '\n';
        for (const auto& [x, y] : r.scatter) out << "pair " << format_real(x) << ' ' << format_real(y) << '\n';
    }
    fs::rename(tmp, path);
}

std::optional<TaskResult> read_cache(const std::string& path, const SweepConfig& cfg, const Task& t,
                                     std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    TaskResult r;
    std::string kind;
    while (in >> kind) {
        if (kind == "row") {
            std::string metric, value, wall;
            in >> metric >> value >> wall;
            r.rows.push_back({cfg.system, t.cell, t.replicate, seed, metric, parse_real<double>(value),
                              parse_real<double>(wall)});
        } else if (kind == "fail") {
            std::string reason;
            std::getline(in >> std::ws, reason);
            r.failures.push_back(reason);
        } else if (kind == "pair") {
            std::string x, y;
            in >> x >> y;
            r.scatter.emplace_back(parse_real<double>(x), parse_real<double>(y));
        } else {
            return std::nullopt;
        }
    }
    return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <Real T>
Trajectory<T> with_start(Trajectory<T> pred, const State3<T>& start) {
    pred.points.insert(pred.points.begin(), start);
    return pred;
}

TaskResult run_task(const SweepConfig& cfg, const Task& t, const ReturnMapFit* fit) {
    TaskResult r;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t nseed = network_seed(cfg, t.cell.net, t.cell.train_size, t.replicate);
    auto push = [&](const std::string& metric, double value) {
        r.rows.push_back({cfg.system, t.cell, t.replicate, nseed, metric, value, 0.0});
    };
    auto attempt = [&](const std::string& metric, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            r.failures.push_back(metric + ": " + e.what());
        }
    };

    AnyTrajectory data;
    TrainedNet trained;
    try {
        data = generate_trajectory(cfg.system, t.cell.train_size - 1, cfg.dt, t.cell.data_precision,
                                   data_seed(cfg, t.cell.train_size, t.replicate));
        const auto tt = std::chrono::steady_clock::now();
        trained = train_network(t.cell.net, t.cell.net_precision, {data}, nseed, cfg.net);
        if (wants(cfg, "train_time")) push("train_seconds", seconds_since(tt));
    } catch (const std::exception& e) {
        r.failures.push_back(std::string("train: ") + e.what());
        return r;
    }

    if (wants(cfg, "tau_lim"))
        attempt("tau_lim", [&] {
            // A forecast that turns non-finite at point k has departed by then:
            // score the finite prefix and cap the result at the time of point k.
            std::size_t n = cfg.horizon;
            std::optional<std::size_t> diverged;
            AnyTrajectory pred;
            try {
                pred = predict_network(trained.net, data, n);
            } catch (const PredictionDiverged& e) {
                diverged = e.step();
                n = e.step();
                pred = predict_network(trained.net, data, n);
            }
            const State3<DDouble> start =
                std::visit([](const auto& d) { return convert<DDouble>(d.points.back()); }, data);
            const auto ref = integrate(start, cfg.horizon, from_decimal<DDouble>(cfg.dt), cfg.system);
            const double tau = std::visit(
                [&](const auto& p) {
                    using T = typename std::decay_t<decltype(p)>::value_type;
                    const auto last = std::visit([](const auto& d) { return convert<T>(d.points.back()); }, data);
                    const auto scored = with_start(p, last);
                    const double t = tau_lim(scored, ref, cfg.tau_threshold);
                    if (!diverged) return t;
                    const bool departed =
                        distance(scored.points.back(), ref.points[n]) / rms_norm(ref) > cfg.tau_threshold;
                    return t < static_cast<double>(n) * cfg.dt || departed ? t
                                                                           : static_cast<double>(n + 1) * cfg.dt;
                },
                pred);
            push("tau_lim", tau);
        });

    if (wants(cfg, "return_map") || wants(cfg, "one_step")) {
        std::optional<AnyTrajectory> longrun;
        // Index k of longrun is closed-loop step k; index 0 is the last training point.
        attempt("long_prediction", [&] {
            longrun = std::visit(
                [&](auto p) -> AnyTrajectory {
                    using T = typename decltype(p)::value_type;
                    return with_start(std::move(p),
                                      std::visit([](const auto& d) { return convert<T>(d.points.back()); }, data));
                },
                predict_network(trained.net, data, cfg.long_steps));
        });
        if (longrun && wants(cfg, "return_map"))
            attempt("return_map", [&] {
                const auto maxima = std::visit([](const auto& p) { return extract_maxima(p); }, *longrun);
                const ReturnMap rm = make_return_map(maxima);
                push("xi", return_map_error(rm, *fit));
                if (t.replicate == 0) r.scatter = rm.pairs;
            });
        if (longrun && wants(cfg, "one_step"))
            attempt("one_step", [&] {
                const auto field = default_field<DDouble>(cfg.system);
                const MeanStd ms = std::visit(
                    [&](const auto& p) { return one_step_error(p, field, cfg.one_step_start, cfg.one_step_count); },
                    *longrun);
                push("one_step_mean", ms.mean);
                push("one_step_std", ms.std);
            });
    }

    if (wants(cfg, "lyapunov"))
        attempt("lyapunov", [&] {
            const LyapunovSpectrum ly = lyapunov_network(trained.net, data, cfg.lyapunov_steps);
            push("lambda1", ly.lambdas[0]);
            push("lambda2", ly.lambdas[1]);
            push("lambda3", ly.lambdas[2]);
        });

    const double wall = seconds_since(t0);
    for (auto& row : r.rows) row.wall_seconds = wall;
    return r;
}

std::vector<ScatterSeries> divergence_curves(const SweepConfig& cfg) {
    const State3<double> ic = random_initial_condition(cfg.system, data_seed(cfg, 0, 0), cfg.dt);
    const auto ref = integrate(convert<DDouble>(ic), cfg.horizon, from_decimal<DDouble>(cfg.dt), cfg.system);
    std::vector<ScatterSeries> out;
    auto curve = [&]<class T>(std::type_identity<T>, const char* label) {
        const auto run = integrate(convert<T>(ic), cfg.horizon, from_decimal<T>(cfg.dt), cfg.system);
        ScatterSeries s{label, {}};
        for (const auto& p : divergence_series(run, ref)) s.points.emplace_back(p.t, p.distance);
        out.push_back(std::move(s));
    };
    curve(std::type_identity<float>{}, "single");
    curve(std::type_identity<double>{}, "double");
    return out;
}

}  // namespace

ExperimentReport run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    std::vector<Task> tasks;
    for (auto n : cfg.train_sizes)
        for (auto net : cfg.nets)
            for (auto dp : cfg.data_precisions)
                for (auto np : cfg.net_precisions)
                    for (std::size_t rep = 0; rep < cfg.seeds; ++rep) tasks.push_back({{net, np, dp, n}, rep});

    std::optional<ReturnMapFit> fit;
    if (wants(cfg, "return_map")) {
        const auto ref = integrate(random_initial_condition(cfg.system, derive_key(cfg.master_seed, {0xf17u}), cfg.dt),
                                   cfg.reference_steps, from_decimal<double>(cfg.dt), cfg.system);
        fit = fit_return_map(make_return_map(extract_maxima(ref)));
    }

    const std::uint64_t fingerprint = config_fingerprint(cfg);
    std::vector<TaskResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& t = tasks[i];
            const std::string path = cache_path(cfg, fingerprint, t);
            const std::uint64_t seed = network_seed(cfg, t.cell.net, t.cell.train_size, t.replicate);
            if (cfg.use_cache)
                if (auto cached = read_cache(path, cfg, t, seed)) {
                    results[i] = std::move(*cached);
                    continue;
                }
            results[i] = run_task(cfg, t, fit ? &*fit : nullptr);
            if (cfg.use_cache) write_cache(path, results[i]);
        }
    };
    const std::size_t nthreads = std::min(cfg.workers, tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < nthreads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    ExperimentReport rep;
    rep.system = cfg.system;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto& r = results[i];
        rep.rows.insert(rep.rows.end(), r.rows.begin(), r.rows.end());
        for (auto& f : r.failures) rep.failures.push_back({tasks[i].cell, tasks[i].replicate, std::move(f)});
        if (!r.scatter.empty()) rep.return_maps.push_back({tasks[i].cell.label(), std::move(r.scatter)});
    }
    if (wants(cfg, "divergence")) rep.divergence = divergence_curves(cfg);
    return rep;
}

// ---------------------------------------------------------------------------
// Reports

std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows) {
    std::vector<Aggregate> out;
    std::map<std::string, std::vector<double>> values;
    for (const auto& r : rows) {
        const std::string key = r.cell.label() + "|" + r.metric;
        auto& v = values[key];
        if (v.empty()) out.push_back({r.cell, r.metric, 0.0, 0.0, 0});
        v.push_back(r.value);
    }
    for (auto& a : out) {
        const auto& v = values[a.cell.label() + "|" + a.metric];
        const MeanStd ms = mean_std(v);
        a.mean = ms.mean;
        a.std = v.size() >= 2 ? ms.std : std::numeric_limits<double>::quiet_NaN();
        a.n = v.size();
    }
    return out;
}

namespace {

std::string short_name(const std::string& metric) {
    if (metric == "tau_lim") return "tau";
    if (metric == "one_step_mean") return "one_step";
    return metric;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string fmt(double v) {
    return std::isnan(v) ? std::string() : format_real(v);
}

void write_plot(const std::string& path, const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream out(path);
    for (const auto& [k, v] : fields) out << k << ": " << v << '\n';
}

}  // namespace

std::vector<std::string> write_report(const ExperimentReport& rep, const std::string& out_dir) {
    if (rep.rows.empty() && rep.failures.empty()) throw std::invalid_argument("write_report: report has no cells");
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    auto path = [&](const std::string& name) {
        written.push_back((fs::path(out_dir) / name).string());
        return written.back();
    };

    {
        std::ofstream out(path("rows.csv"));
        out << "system,net,net_prec,data_prec,train_size,replicate,seed,metric,value,wall_seconds\n";
        for (const auto& r : rep.rows)
            out << to_string(r.system) << ',' << to_string(r.cell.net) << ',' << to_string(r.cell.net_precision) << ','
                << to_string(r.cell.data_precision) << ',' << r.cell.train_size << ',' << r.replicate << ',' << r.seed
                << ',' << r.metric << ',' << format_real(r.value) << ',' << format_real(r.wall_seconds) << '\n';
    }

    const auto aggs = aggregate(rep.rows);
    std::vector<std::string> metrics;
    for (const auto& a : aggs)
        if (std::find(metrics.begin(), metrics.end(), a.metric) == metrics.end()) metrics.push_back(a.metric);
    for (const auto& m : metrics) {
        const std::string s = short_name(m);
        std::ofstream out(path(m + ".csv"));
        out << "net,net_prec,data_prec,train_size,mean_" << s << ",std_" << s << ",n_seeds\n";
        for (const auto& a : aggs)
            if (a.metric == m)
                out << to_string(a.cell.net) << ',' << to_string(a.cell.net_precision) << ','
                    << to_string(a.cell.data_precision) << ',' << a.cell.train_size << ',' << fmt(a.mean) << ','
                    << fmt(a.std) << ',' << a.n << '\n';
    }

    if (!rep.failures.empty()) {
        std::ofstream out(path("failures.csv"));
        out << "net,net_prec,data_prec,train_size,replicate,reason\n";
        for (const auto& f : rep.failures)
            out << to_string(f.cell.net) << ',' << to_string(f.cell.net_precision) << ','
                << to_string(f.cell.data_precision) << ',' << f.cell.train_size << ',' << f.replicate << ','
                << csv_quote(f.reason) << '\n';
    }

    const auto series = std::pair<std::string, std::string>{"series", "net net_prec data_prec"};
    auto vs_size = [&](const std::string& metric, const std::string& file, const std::string& title) {
        if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end()) return;
        const std::string s = short_name(metric);
        write_plot(path(file), {{"title", title},
                                {"kind", "errorbar"},
                                {"data", metric + ".csv"},
                                {"x", "train_size"},
                                {"y", "mean_" + s},
                                {"yerr", "std_" + s},
                                series});
    };
    vs_size("tau_lim", "tau_vs_train_size.plot", "tau_lim against training size");
    vs_size("xi", "xi_vs_train_size.plot", "return-map error against training size");
    vs_size("one_step_mean", "one_step_vs_train_size.plot", "one-step error against training size");
    vs_size("train_seconds", "train_time.plot", "training wall time against training size");
    if (std::find(metrics.begin(), metrics.end(), "lambda1") != metrics.end())
        write_plot(path("lyapunov.plot"), {{"title", "network Lyapunov spectrum"},
                                           {"kind", "errorbar"},
                                           {"data", "lambda1.csv lambda2.csv lambda3.csv"},
                                           {"x", "net_prec data_prec"},
                                           {"y", "mean_lambda1 mean_lambda2 mean_lambda3"},
                                           series});

    if (!rep.return_maps.empty()) {
        std::string files;
        for (const auto& sc : rep.return_maps) {
            const std::string name = "return_map_" + sc.label + ".csv";
            std::ofstream out(path(name));
            out << "z_i,z_next\n";
            for (const auto& [x, y] : sc.points) out << format_real(x) << ',' << format_real(y) << '\n';
            files += (files.empty() ? "" : " ") + name;
        }
        write_plot(path("return_map.plot"), {{"title", "return map of successive z maxima"},
                                             {"kind", "scatter"},
                                             {"data", files},
                                             {"x", "z_i"},
                                             {"y", "z_next"}});
    }

    if (!rep.divergence.empty()) {
        std::ofstream out(path("divergence.csv"));
        out << "t";
        for (const auto& d : rep.divergence) out << ',' << d.label;
        out << '\n';
        for (std::size_t i = 0; i < rep.divergence.front().points.size(); ++i) {
            out << format_real(rep.divergence.front().points[i].first);
            for (const auto& d : rep.divergence) out << ',' << format_real(d.points[i].second);
            out << '\n';
        }
        write_plot(path("divergence.plot"), {{"title", "distance to the extended-precision trajectory"},
                                             {"kind", "line"},
                                             {"data", "divergence.csv"},
                                             {"x", "t"},
                                             {"y", "single double"},
                                             {"yscale", "log"}});
    }
    return written;
}

ExperimentReport read_report_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);
    if (line.rfind("system,net,net_prec", 0) != 0) throw std::runtime_error("'" + path + "' is not a rows.csv");
    ExperimentReport rep;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 10) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 10 fields");
        ReportRow r;
        r.system = parse_system(f[0]);
        r.cell = {parse_net_kind(f[1]), parse_precision(f[2]), parse_precision(f[3]), std::stoull(f[4])};
        r.replicate = std::stoull(f[5]);
        r.seed = std::stoull(f[6]);
        r.metric = f[7];
        r.value = parse_real<double>(f[8]);
        r.wall_seconds = parse_real<double>(f[9]);
        rep.system = r.system;
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

}  // namespace chaosbench
