#pragma once

// Precision-erased handle over the three forecaster families, so the CLI and
// the sweep can treat "esn300 at single" and "tcn at double" uniformly.

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <variant>
#include <vector>

#include "chaosbench/analysis.hpp"
#include "chaosbench/dynamics.hpp"
#include "chaosbench/esn.hpp"
#include "chaosbench/rnn.hpp"

namespace chaosbench {

enum class NetKind { Esn200, Esn300, Lstm64, Tcn };

std::string_view to_string(NetKind k);
/// Accepts esn200, esn300, lstm64, tcn.
NetKind parse_net_kind(std::string_view text);

struct NetOptions {
    EsnConfig esn;  // reservoir_size, precision and seed are set per network
    LstmShape lstm;
    TcnShape tcn;
    TrainConfig train;  // precision and seed are set per network
};

using AnyNet = std::variant<EsnModel<float>, EsnModel<double>, LstmModel<float>, LstmModel<double>, TcnModel<float>,
                            TcnModel<double>>;

Precision net_precision(const AnyNet& net);
/// esn<N>, lstm<hidden> or tcn.
std::string label_of(const AnyNet& net);

struct ParamCounts {
    std::size_t trainable = 0;
    std::size_t total = 0;

    bool operator==(const ParamCounts&) const = default;
};

/// Trainable parameters follow from the architecture alone; the ESN total
/// adds the nonzero entries of the frozen W and W_in drawn from `seed`.
ParamCounts param_counts(NetKind kind, const NetOptions& opt = {}, std::uint64_t seed = 0);
ParamCounts param_counts(const AnyNet& net);

struct TrainedNet {
    AnyNet net;
    std::vector<double> epoch_loss;  // empty for the ESN
};

/// Casts `data` to the network precision, initializes from `seed` and trains.
TrainedNet train_network(NetKind kind, Precision net_precision, const std::vector<AnyTrajectory>& data,
                         std::uint64_t seed, const NetOptions& opt = {});

/// Closed-loop continuation after teacher forcing through `warm` (cast to the
/// network precision). Returns the n predicted points.
AnyTrajectory predict_network(const AnyNet& net, const AnyTrajectory& warm, std::size_t n);

/// Lyapunov spectrum of the closed loop started where `warm` leaves it.
LyapunovSpectrum lyapunov_network(const AnyNet& net, const AnyTrajectory& warm, std::size_t n_steps,
                                  const LyapunovMapOptions& opt = {});

void save_network(std::ostream& os, const AnyNet& net);
AnyNet load_network(std::istream& is);

}  // namespace chaosbench
