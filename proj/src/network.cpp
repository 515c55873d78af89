#include "chaosbench/network.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace chaosbench {

std::string_view to_string(NetKind k) {
    switch (k) {
        case NetKind::Esn200: return "esn200";
        case NetKind::Esn300: return "esn300";
        case NetKind::Lstm64: return "lstm64";
        case NetKind::Tcn: return "tcn";
    }
    return "?";
}

NetKind parse_net_kind(std::string_view text) {
    for (NetKind k : {NetKind::Esn200, NetKind::Esn300, NetKind::Lstm64, NetKind::Tcn})
        if (to_string(k) == text) return k;
    throw std::invalid_argument("unknown network '" + std::string(text) + "' (esn200|esn300|lstm64|tcn)");
}

namespace {

template <class>
inline constexpr bool kIsEsn = false;
template <NetReal T>
inline constexpr bool kIsEsn<EsnModel<T>> = true;

template <class>
inline constexpr bool kIsLstm = false;
template <NetReal T>
inline constexpr bool kIsLstm<LstmModel<T>> = true;

template <class M>
struct ScalarOf;
template <template <class> class M, NetReal T>
struct ScalarOf<M<T>> {
    using type = T;
};

template <NetReal T>
std::vector<Trajectory<T>> cast_all(const std::vector<AnyTrajectory>& data) {
    std::vector<Trajectory<T>> out;
    out.reserve(data.size());
    for (const auto& d : data) out.push_back(std::visit([](const auto& t) { return convert<T>(t); }, d));
    return out;
}

template <NetReal T>
Trajectory<T> cast_one(const AnyTrajectory& t) {
    return std::visit([](const auto& x) { return convert<T>(x); }, t);
}

EsnConfig esn_config(NetKind kind, Precision p, std::uint64_t seed, const NetOptions& opt) {
    EsnConfig cfg = opt.esn;
    cfg.reservoir_size = kind == NetKind::Esn200 ? 200 : 300;
    cfg.precision = p;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

Precision net_precision(const AnyNet& net) {
    return std::visit([](const auto& m) { return precision_v<typename ScalarOf<std::decay_t<decltype(m)>>::type>; },
                      net);
}

std::string label_of(const AnyNet& net) {
    return std::visit(
        [](const auto& m) -> std::string {
            using M = std::decay_t<decltype(m)>;
            if constexpr (kIsEsn<M>)
                return "esn" + std::to_string(m.reservoir_size());
            else if constexpr (kIsLstm<M>)
                return "lstm" + std::to_string(m.hidden);
            else
                return "tcn";
        },
        net);
}

ParamCounts param_counts(NetKind kind, const NetOptions& opt, std::uint64_t seed) {
    switch (kind) {
        case NetKind::Esn200:
        case NetKind::Esn300:
            return param_counts(AnyNet(init_esn<double>(esn_config(kind, Precision::Double, seed, opt))));
        case NetKind::Lstm64: {
            LstmShape shape = opt.lstm;
            shape.hidden = 64;
            return param_counts(AnyNet(init_lstm<double>(shape, seed)));
        }
        case NetKind::Tcn: return param_counts(AnyNet(init_tcn<double>(opt.tcn, seed)));
    }
    throw std::invalid_argument("param_counts: unknown network kind");
}

ParamCounts param_counts(const AnyNet& net) {
    return std::visit(
        [](const auto& m) -> ParamCounts {
            using M = std::decay_t<decltype(m)>;
            if constexpr (kIsEsn<M>)
                return {m.trainable_parameters(), m.total_parameters()};
            else
                return {m.parameter_count(), m.parameter_count()};
        },
        net);
}

TrainedNet train_network(NetKind kind, Precision net_precision, const std::vector<AnyTrajectory>& data,
                         std::uint64_t seed, const NetOptions& opt) {
    if (data.empty()) throw std::invalid_argument("train_network: no training data");
    return visit_net_precision(net_precision, [&]<class T>(std::type_identity<T>) -> TrainedNet {
        const auto trajs = cast_all<T>(data);
        TrainConfig tc = opt.train;
        tc.precision = net_precision;
        tc.seed = seed;
        switch (kind) {
            case NetKind::Esn200:
            case NetKind::Esn300:
                return {train_readout(init_esn<T>(esn_config(kind, net_precision, seed, opt)), trajs), {}};
            case NetKind::Lstm64: {
                LstmShape shape = opt.lstm;
                shape.hidden = 64;
                tc.window = shape.window;
                auto r = train_rnn(init_lstm<T>(shape, seed), trajs, tc);
                return {std::move(r.model), std::move(r.epoch_loss)};
            }
            case NetKind::Tcn: {
                tc.window = opt.tcn.window;
                auto r = train_rnn(init_tcn<T>(opt.tcn, seed), trajs, tc);
                return {std::move(r.model), std::move(r.epoch_loss)};
            }
        }
        throw std::invalid_argument("train_network: unknown network kind");
    });
}

AnyTrajectory predict_network(const AnyNet& net, const AnyTrajectory& warm, std::size_t n) {
    return std::visit(
        [&](const auto& m) -> AnyTrajectory {
            using T = typename ScalarOf<std::decay_t<decltype(m)>>::type;
            return predict_closed_loop(m, cast_one<T>(warm), n);
        },
        net);
}

LyapunovSpectrum lyapunov_network(const AnyNet& net, const AnyTrajectory& warm, std::size_t n_steps,
                                  const LyapunovMapOptions& opt) {
    return std::visit(
        [&](const auto& m) -> LyapunovSpectrum {
            using M = std::decay_t<decltype(m)>;
            using T = typename ScalarOf<M>::type;
            const Trajectory<T> w = cast_one<T>(warm);
            if (w.points.empty()) throw std::invalid_argument("lyapunov_network: empty warm-up trajectory");
            const double dt = static_cast<double>(w.dt);
            if constexpr (kIsEsn<M>)
                return lyapunov_map(closed_loop_map(m), pack_state(w.points.back(), warm_up(m, w)), dt, n_steps, opt);
            else
                return lyapunov_map(closed_loop_map(m), window_state(w, m.window), dt, n_steps, opt);
        },
        net);
}

void save_network(std::ostream& os, const AnyNet& net) {
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (kIsEsn<M>)
                save_esn(os, m);
            else if constexpr (kIsLstm<M>)
                save_lstm(os, m);
            else
                save_tcn(os, m);
        },
        net);
}

AnyNet load_network(std::istream& is) {
    const auto pos = is.tellg();
    std::string magic, version, key, value;
    is >> magic >> version >> key >> value;
    is.clear();
    is.seekg(pos);
    if (key != "precision") throw std::runtime_error("model file: missing precision header");
    const Precision p = parse_precision(value);
    return visit_net_precision(p, [&]<class T>(std::type_identity<T>) -> AnyNet {
        if (magic == "chaosbench-esn") return load_esn<T>(is);
        if (magic == "chaosbench-lstm") return load_lstm<T>(is);
        if (magic == "chaosbench-tcn") return load_tcn<T>(is);
        throw std::runtime_error("unknown model file type '" + magic + "'");
    });
}

}  // namespace chaosbench
