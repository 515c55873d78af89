#pragma once

// Experiment orchestration: on-attractor datasets, the
// {data precision} x {network precision} x {training size} x {network} sweep,
// and CSV / plot-description reports.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chaosbench/dynamics.hpp"
#include "chaosbench/network.hpp"

namespace chaosbench {

/// Uniform in a box around the attractor, followed by `burn_in` discarded
/// double-precision RK4 steps.
State3<double> random_initial_condition(System system, std::uint64_t seed, double dt = 0.02,
                                        std::size_t burn_in = 1000);

/// RK4 at precision p from random_initial_condition(seed) rounded to p;
/// n_steps steps, so n_steps + 1 points.
AnyTrajectory generate_trajectory(System system, std::size_t n_steps, double dt, Precision p, std::uint64_t seed,
                                  std::size_t burn_in = 1000);

struct GenerateOptions {
    System system = System::Lorenz;
    std::size_t n_traj = 100;
    std::size_t n_steps = 50000;
    double dt = 0.02;
    Precision precision = Precision::Double;
    std::uint64_t seed = 0;
    std::size_t burn_in = 1000;
};

/// Writes n_traj files `<system>_<precision>_<index>.traj` into out_dir and
/// returns their paths. Trajectory i uses seed derive_key(seed, {i}).
std::vector<std::string> generate_dataset(const GenerateOptions& opt, const std::string& out_dir);

struct SweepConfig {
    System system = System::Lorenz;
    double dt = 0.02;
    std::vector<std::size_t> train_sizes{20000};
    std::vector<NetKind> nets{NetKind::Esn300};
    std::vector<Precision> net_precisions{Precision::Single, Precision::Double};
    std::vector<Precision> data_precisions{Precision::Single, Precision::Double};
    std::size_t seeds = 100;
    /// Any of tau_lim, return_map, lyapunov, one_step, divergence, train_time.
    std::vector<std::string> metrics{"tau_lim"};
    std::string output_dir = "sweep";
    std::size_t workers = 1;
    std::uint64_t master_seed = 0;
    std::size_t horizon = 2000;          // closed-loop steps scored by tau_lim
    double tau_threshold = 0.05;
    std::size_t long_steps = 50000;      // closed-loop steps for return_map and one_step
    std::size_t lyapunov_steps = 50000;
    std::size_t one_step_start = 25000;
    std::size_t one_step_count = 10000;
    std::size_t reference_steps = 1000000;  // double RK4 run the return map is fitted on
    bool use_cache = true;
    NetOptions net;

    void validate() const;
};

SweepConfig load_sweep_config(const std::string& path);
SweepConfig parse_sweep_config(const std::string& json_text);
std::string sweep_config_json(const SweepConfig& cfg);

struct CellKey {
    NetKind net = NetKind::Esn300;
    Precision net_precision = Precision::Double;
    Precision data_precision = Precision::Double;
    std::size_t train_size = 0;

    std::string label() const;
    bool operator==(const CellKey&) const = default;
};

/// Data seed depends on (system, dt, train size, replicate) and network seed
/// on (network, train size, replicate), so every precision combination of a
/// replicate sees the same initial condition and the same initial weights.
std::uint64_t data_seed(const SweepConfig& cfg, std::size_t train_size, std::size_t replicate);
std::uint64_t network_seed(const SweepConfig& cfg, NetKind net, std::size_t train_size, std::size_t replicate);

struct ReportRow {
    System system = System::Lorenz;
    CellKey cell;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
    double wall_seconds = 0.0;
};

struct CellFailure {
    CellKey cell;
    std::size_t replicate = 0;
    std::string reason;
};

struct Aggregate {
    CellKey cell;
    std::string metric;
    double mean = 0.0;
    double std = 0.0;  // NaN below two seeds
    std::size_t n = 0;
};

struct ScatterSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct ExperimentReport {
    System system = System::Lorenz;
    std::vector<ReportRow> rows;
    std::vector<CellFailure> failures;
    std::vector<ScatterSeries> return_maps;  // first replicate of each cell
    std::vector<ScatterSeries> divergence;   // RK4 at single and double vs Extended

    bool ok() const { return failures.empty(); }
};

/// Cells run on `workers` threads; each (cell, replicate) result is cached
/// under output_dir/cache so a rerun of the same config recomputes nothing.
/// Failures are recorded in the report, never thrown.
ExperimentReport run_sweep(const SweepConfig& cfg);

/// Mean and sample standard deviation per (cell, metric), in row order of
/// first appearance.
std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows);

/// rows.csv, one `<metric>.csv` of aggregates per metric, failures.csv, the
/// scatter/curve CSVs and one `.plot` description per figure. Throws before
/// writing anything if the report has no cells.
std::vector<std::string> write_report(const ExperimentReport& rep, const std::string& out_dir);

/// Reads a rows.csv written by write_report.
ExperimentReport read_report_rows(const std::string& path);

}  // namespace chaosbench
