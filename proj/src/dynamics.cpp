#include "chaosbench/dynamics.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace chaosbench {

std::string_view to_string(System s) {
    return s == System::Lorenz ? "lorenz" : "rossler";
}

System parse_system(std::string_view text) {
    if (text == "lorenz") return System::Lorenz;
    if (text == "rossler") return System::Rossler;
    throw std::invalid_argument("unknown system '" + std::string(text) + "' (expected lorenz|rossler)");
}

double separation_time(const std::vector<DivergencePoint>& series, double threshold) {
    if (series.empty()) throw std::invalid_argument("separation_time: empty series");
    for (const auto& p : series)
        if (p.distance > threshold) return p.t;
    return series.back().t;
}

Precision precision_of_any(const AnyTrajectory& t) {
    return static_cast<Precision>(t.index());
}

template <Real T>
void write_trajectory(std::ostream& os, const Trajectory<T>& traj) {
    os << to_string(traj.system) << ' ' << format_real(traj.dt) << ' ' << traj.steps() << ' '
       << to_string(precision_v<T>) << ' ' << traj.seed << '\n';
    for (const auto& p : traj.points)
        os << format_real(p.x) << ' ' << format_real(p.y) << ' ' << format_real(p.z) << '\n';
}

template void write_trajectory(std::ostream&, const Trajectory<float>&);
template void write_trajectory(std::ostream&, const Trajectory<double>&);
template void write_trajectory(std::ostream&, const Trajectory<DDouble>&);

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    if (sep == ' ') {
        std::istringstream ss(line);
        std::string f;
        while (ss >> f) out.push_back(f);
        return out;
    }
    std::string f;
    std::istringstream ss(line);
    while (std::getline(ss, f, sep)) {
        f.erase(0, f.find_first_not_of(" \t\r"));
        f.erase(f.find_last_not_of(" \t\r") + 1);
        out.push_back(f);
    }
    return out;
}

template <Real T>
Trajectory<T> read_native_rows(std::istream& is, Trajectory<T> traj, std::size_t steps) {
    std::string line;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_fields(line, ' ');
        if (f.size() != 3)
            throw std::runtime_error("trajectory row " + std::to_string(row) + ": expected 3 fields");
        traj.points.push_back({parse_real<T>(f[0]), parse_real<T>(f[1]), parse_real<T>(f[2])});
        ++row;
    }
    if (traj.points.size() != steps + 1)
        throw std::runtime_error("trajectory header announces " + std::to_string(steps) +
                                 " steps but file holds " + std::to_string(traj.points.size()) + " points");
    return traj;
}

template <Real T>
Trajectory<T> read_csv_rows(std::istream& is, const std::vector<std::string>& header, const CsvDefaults& d) {
    auto col = [&](std::string_view name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int ix = col("x"), iy = col("y"), iz = col("z"), it = col("t");
    if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("CSV header must name x, y and z columns");
    Trajectory<T> traj;
    traj.system = d.system;
    traj.dt = from_double<T>(d.dt);
    traj.provenance = "csv";
    std::vector<double> times;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_fields(line, ',');
        const auto need = static_cast<std::size_t>(std::max({ix, iy, iz, it})) + 1;
        if (f.size() < need) throw std::runtime_error("CSV row has too few fields");
        traj.points.push_back({parse_real<T>(f[ix]), parse_real<T>(f[iy]), parse_real<T>(f[iz])});
        if (it >= 0) times.push_back(parse_real<double>(f[it]));
    }
    if (traj.points.empty()) throw std::runtime_error("CSV trajectory has no rows");
    if (times.size() >= 2) traj.dt = from_double<T>(times[1] - times[0]);
    return traj;
}

}  // namespace

AnyTrajectory read_trajectory(std::istream& is, const CsvDefaults& fallback) {
    std::string line;
    while (std::getline(is, line))
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    if (!is && line.empty()) throw std::runtime_error("empty trajectory file");

    if (line.find(',') != std::string::npos) {
        const auto header = split_fields(line, ',');
        return visit_precision(fallback.precision, [&](auto tag) -> AnyTrajectory {
            using T = typename decltype(tag)::type;
            return read_csv_rows<T>(is, header, fallback);
        });
    }

    const auto f = split_fields(line, ' ');
    if (f.size() != 5) throw std::runtime_error("trajectory header must be `system dt n precision seed`");
    const System system = parse_system(f[0]);
    const Precision prec = parse_precision(f[3]);
    const auto steps = static_cast<std::size_t>(std::stoull(f[2]));
    const auto seed = static_cast<std::uint64_t>(std::stoull(f[4]));
    return visit_precision(prec, [&](auto tag) -> AnyTrajectory {
        using T = typename decltype(tag)::type;
        Trajectory<T> traj;
        traj.system = system;
        traj.dt = parse_real<T>(f[1]);
        traj.seed = seed;
        traj.provenance = "file";
        traj.points.reserve(steps + 1);
        if (!(traj.dt > T(0))) throw std::runtime_error("trajectory dt must be positive");
        return read_native_rows<T>(is, std::move(traj), steps);
    });
}

void save_trajectory(const std::string& path, const AnyTrajectory& traj) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    std::visit([&](const auto& t) { write_trajectory(os, t); }, traj);
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

AnyTrajectory load_trajectory(const std::string& path, const CsvDefaults& fallback) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_trajectory(is, fallback);
}

}  // namespace chaosbench
