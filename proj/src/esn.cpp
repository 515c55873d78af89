#include "chaosbench/esn.hpp"

#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <random>

#include "chaosbench/errors.hpp"

namespace chaosbench {

void EsnConfig::validate() const {
    if (reservoir_size < 1) throw std::invalid_argument("esn: reservoir_size must be >= 1");
    if (!(leak > 0.0 && leak <= 1.0)) throw std::invalid_argument("esn: leak must be in (0, 1]");
    if (!(spectral_radius > 0.0)) throw std::invalid_argument("esn: spectral_radius must be > 0");
    if (!(input_density > 0.0 && input_density <= 1.0) || !(reservoir_density > 0.0 && reservoir_density <= 1.0))
        throw std::invalid_argument("esn: densities must be in (0, 1]");
    if (ridge_beta && !(*ridge_beta >= 0.0)) throw std::invalid_argument("esn: ridge_beta must be >= 0");
    if (!(input_scale > 0.0)) throw std::invalid_argument("esn: input_scale must be > 0");
    if (precision == Precision::Extended) throw std::invalid_argument("esn: networks run at single or double");
}

double default_ridge_beta(Precision p, std::size_t training_columns) {
    const double lo_n = 5e3, hi_n = 5e5;
    const double n = std::clamp(static_cast<double>(training_columns), lo_n, hi_n);
    const double frac = std::log10(n / lo_n) / std::log10(hi_n / lo_n);
    const auto [lo_exp, hi_exp] = p == Precision::Single ? std::pair{-4.0, -1.0} : std::pair{-8.0, -7.0};
    return std::pow(10.0, lo_exp + frac * (hi_exp - lo_exp));
}

template <NetReal T>
std::size_t EsnModel<T>::total_parameters() const {
    const auto nnz = [](const Mat<T>& m) { return static_cast<std::size_t>((m.array() != T(0)).count()); };
    return trainable_parameters() + nnz(W) + nnz(W_in);
}

namespace {

Mat<double> sparse_gaussian(CounterRng rng, Eigen::Index rows, Eigen::Index cols, double density, double std) {
    std::normal_distribution<double> gauss(0.0, std);
    Mat<double> m = Mat<double>::Zero(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            if (rng.uniform() < density) m(r, c) = gauss(rng);
    return m;
}

}  // namespace

template <NetReal T>
EsnModel<T> init_esn(const EsnConfig& cfg) {
    cfg.validate();
    if (cfg.precision != precision_v<T>)
        throw std::invalid_argument("init_esn: config precision does not match the model type");
    const auto n = static_cast<Eigen::Index>(cfg.reservoir_size);
    const CounterRng root(cfg.seed);

    Mat<double> w = sparse_gaussian(root.split(1), n, n, cfg.reservoir_density, cfg.reservoir_std);
    const SpectralRadius sr = spectral_radius(w);
    if (!(sr.value > 0.0)) throw InitDegenerate("esn: reservoir draw has zero spectral radius");
    w *= cfg.spectral_radius / sr.value;

    EsnModel<T> m;
    m.config = cfg;
    m.W = w.cast<T>();
    m.W_in = sparse_gaussian(root.split(2), n, 4, cfg.input_density, cfg.input_std).cast<T>();
    m.W_out = Mat<T>::Zero(3, n + 4);
    return m;
}

namespace {

template <NetReal T>
Vec<T> pre_activation(const EsnModel<T>& m, const EsnState<T>& st, const State3<T>& u) {
    const T inv_scale = T(1) / static_cast<T>(m.config.input_scale);
    const T u0 = u.x * inv_scale, u1 = u.y * inv_scale, u2 = u.z * inv_scale;
    Vec<T> pre = m.W * st.x;
    pre += m.W_in.col(0) + m.W_in.col(1) * u0 + m.W_in.col(2) * u1 + m.W_in.col(3) * u2;
    pre.array() += static_cast<T>(m.config.offset);
    return pre;
}

}  // namespace

template <NetReal T>
EsnState<T> reservoir_step(const EsnModel<T>& m, const EsnState<T>& st, const State3<T>& u, ReservoirNoise* noise) {
    Vec<T> pre = pre_activation(m, st, u);
    if (noise != nullptr)
        for (Eigen::Index i = 0; i < pre.size(); ++i) pre(i) += static_cast<T>(noise->draw());
    const T alpha = static_cast<T>(m.config.leak);
    const T keep = T(1) - alpha;
    EsnState<T> out;
    out.x = keep * st.x + alpha * pre.unaryExpr([](T v) { return tanh_r(v); });
    return out;
}

template <NetReal T>
Vec<T> readout_features(const State3<T>& u, const EsnState<T>& st) {
    Vec<T> f(st.x.size() + 4);
    f(0) = T(1);
    f(1) = u.x;
    f(2) = u.y;
    f(3) = u.z;
    f.tail(st.x.size()) = st.x;
    return f;
}

template <NetReal T>
State3<T> readout(const EsnModel<T>& m, const State3<T>& u, const EsnState<T>& st) {
    const Eigen::Index n = st.x.size();
    Eigen::Matrix<T, 3, 1> y = m.W_out.col(0) + m.W_out.col(1) * u.x + m.W_out.col(2) * u.y + m.W_out.col(3) * u.z;
    y += m.W_out.rightCols(n) * st.x;
    return {y(0), y(1), y(2)};
}

namespace {

// Solves (G + beta I) W^T = C^T with G holding X X^T in its lower triangle.
template <NetReal T>
Mat<T> ridge_from_gram(Mat<T> gram, const Mat<T>& cross, double beta) {
    gram.diagonal().array() += static_cast<T>(beta);
    const char* hint = " (use ridge_beta > 0)";
    Eigen::LDLT<Mat<T>, Eigen::Lower> ldlt(gram);
    Mat<T> w_out_t;
    if (beta == 0.0) {
        if (ldlt.info() != Eigen::Success ||
            !(ldlt.rcond() > static_cast<double>(std::numeric_limits<T>::epsilon())))
            throw IllConditioned(std::string("ridge system is numerically singular at beta = 0") + hint);
        w_out_t = ldlt.solve(Mat<T>(cross.transpose()));
    } else if (ldlt.info() == Eigen::Success) {
        w_out_t = ldlt.solve(Mat<T>(cross.transpose()));
    } else {
        // beta is below the rounding level of the Gram diagonal (saturated
        // neurons give exactly collinear columns); the rank-revealing solve
        // drops the null directions.
        gram.template triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        w_out_t = gram.colPivHouseholderQr().solve(Mat<T>(cross.transpose()));
    }
    if (!w_out_t.allFinite()) throw IllConditioned(std::string("ridge solve produced non-finite weights") + hint);
    return w_out_t.transpose();
}

}  // namespace

template <NetReal T>
Mat<T> solve_ridge(const Mat<T>& X, const Mat<T>& Y, double beta) {
    if (X.cols() != Y.cols()) throw std::invalid_argument("solve_ridge: X and Y column counts differ");
    Mat<T> gram = Mat<T>::Zero(X.rows(), X.rows());
    gram.template selfadjointView<Eigen::Lower>().rankUpdate(X);
    return ridge_from_gram<T>(std::move(gram), Y * X.transpose(), beta);
}

template <NetReal T>
EsnModel<T> train_readout(EsnModel<T> m, const std::vector<Trajectory<T>>& trajs) {
    if (trajs.empty()) throw std::invalid_argument("train_readout: no trajectories");
    const std::size_t washout = m.config.washout;
    for (const auto& t : trajs)
        if (t.size() <= washout + 1)
            throw std::invalid_argument("train_readout: every trajectory needs more than washout + 1 points");

    const Eigen::Index n = static_cast<Eigen::Index>(m.reservoir_size());
    const Eigen::Index feat = n + 4;
    constexpr Eigen::Index kChunk = 512;
    Mat<T> gram = Mat<T>::Zero(feat, feat);
    Mat<T> cross = Mat<T>::Zero(3, feat);
    Mat<T> zc(feat, kChunk), yc(3, kChunk);
    Eigen::Index fill = 0;
    std::size_t columns = 0;

    auto flush = [&] {
        if (fill == 0) return;
        gram.template selfadjointView<Eigen::Lower>().rankUpdate(zc.leftCols(fill));
        cross.noalias() += yc.leftCols(fill) * zc.leftCols(fill).transpose();
        fill = 0;
    };

    ReservoirNoise noise(CounterRng(m.config.seed).split(3), m.config.noise_std);
    ReservoirNoise* noise_ptr = m.config.noise_std > 0.0 ? &noise : nullptr;
    for (const auto& traj : trajs) {
        EsnState<T> st = m.zero_state();
        for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
            const State3<T>& u = traj.points[k];
            st = reservoir_step(m, st, u, noise_ptr);
            if (k < washout) continue;
            zc.col(fill) = readout_features(u, st);
            const State3<T>& target = traj.points[k + 1];
            yc.col(fill) << target.x, target.y, target.z;
            ++fill;
            ++columns;
            if (fill == kChunk) flush();
        }
    }
    flush();

    const double beta = m.config.ridge_beta.value_or(default_ridge_beta(precision_v<T>, columns));
    m.W_out = ridge_from_gram<T>(std::move(gram), cross, beta);
    m.ridge_beta_used = beta;
    m.trained = true;
    return m;
}

template <NetReal T>
EsnState<T> warm_up(const EsnModel<T>& m, const Trajectory<T>& warm) {
    EsnState<T> st = m.zero_state();
    for (const auto& p : warm.points) st = reservoir_step(m, st, p);
    return st;
}

template <NetReal T>
Trajectory<T> run_closed_loop(const EsnModel<T>& m, EsnState<T> st, State3<T> u, std::size_t n, T dt) {
    Trajectory<T> out;
    out.dt = dt;
    out.provenance = "esn";
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const State3<T> y = readout(m, u, st);
        if (!y.finite()) throw PredictionDiverged(i);
        out.points.push_back(y);
        if (i + 1 < n) st = reservoir_step(m, st, y);
        u = y;
    }
    return out;
}

template <NetReal T>
Trajectory<T> predict_closed_loop(const EsnModel<T>& m, const Trajectory<T>& warm, std::size_t n) {
    if (warm.points.empty()) throw std::invalid_argument("predict_closed_loop: empty warm-up trajectory");
    Trajectory<T> out = run_closed_loop(m, warm_up(m, warm), warm.points.back(), n, warm.dt);
    out.system = warm.system;
    out.seed = m.config.seed;
    return out;
}

template <NetReal T>
std::vector<double> pack_state(const State3<T>& u, const EsnState<T>& st) {
    std::vector<double> s(static_cast<std::size_t>(st.x.size()) + 3);
    s[0] = static_cast<double>(u.x);
    s[1] = static_cast<double>(u.y);
    s[2] = static_cast<double>(u.z);
    for (Eigen::Index i = 0; i < st.x.size(); ++i) s[static_cast<std::size_t>(i) + 3] = static_cast<double>(st.x(i));
    return s;
}

template <NetReal T>
DiscreteMap closed_loop_map(const EsnModel<T>& m) {
    const Eigen::Index n = static_cast<Eigen::Index>(m.reservoir_size());
    struct Shared {
        EsnModel<T> model;
        Mat<double> w, w_in_u, w_out_u, w_out_x;
    };
    auto sh = std::make_shared<Shared>();
    sh->model = m;
    sh->w = m.W.template cast<double>();
    sh->w_in_u = m.W_in.rightCols(3).template cast<double>() / m.config.input_scale;
    sh->w_out_u = m.W_out.middleCols(1, 3).template cast<double>();
    sh->w_out_x = m.W_out.rightCols(n).template cast<double>();

    DiscreteMap map;
    map.dim = static_cast<std::size_t>(n) + 3;
    map.step = [sh, n](std::vector<double>& s) {
        State3<T> u{static_cast<T>(s[0]), static_cast<T>(s[1]), static_cast<T>(s[2])};
        EsnState<T> st{Eigen::Map<const Vec<double>>(s.data() + 3, n).template cast<T>()};
        const State3<T> y = readout(sh->model, u, st);
        st = reservoir_step(sh->model, st, y);
        s = pack_state(y, st);
    };
    map.tangent = [sh, n](const std::vector<double>& s, std::vector<std::vector<double>>& vs) {
        // Pre-activation of the next update, evaluated at the model precision.
        const State3<T> u{static_cast<T>(s[0]), static_cast<T>(s[1]), static_cast<T>(s[2])};
        const EsnState<T> st{Eigen::Map<const Vec<double>>(s.data() + 3, n).template cast<T>()};
        const State3<T> y = readout(sh->model, u, st);
        const Vec<double> pre = pre_activation(sh->model, st, y).template cast<double>();
        const Vec<double> slope = 1.0 - pre.array().tanh().square();
        const double alpha = sh->model.config.leak;

        const auto k = static_cast<Eigen::Index>(vs.size());
        Mat<double> du(3, k), dx(n, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& v = vs[static_cast<std::size_t>(j)];
            du.col(j) = Eigen::Map<const Vec<double>>(v.data(), 3);
            dx.col(j) = Eigen::Map<const Vec<double>>(v.data() + 3, n);
        }
        const Mat<double> dy = sh->w_out_u * du + sh->w_out_x * dx;
        Mat<double> dpre = sh->w_in_u * dy + sh->w * dx;
        dpre.array().colwise() *= slope.array();
        const Mat<double> dx_next = (1.0 - alpha) * dx + alpha * dpre;
        for (Eigen::Index j = 0; j < k; ++j) {
            auto& v = vs[static_cast<std::size_t>(j)];
            Eigen::Map<Vec<double>>(v.data(), 3) = dy.col(j);
            Eigen::Map<Vec<double>>(v.data() + 3, n) = dx_next.col(j);
        }
    };
    return map;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kEsnMagic = "chaosbench-esn";
constexpr int kEsnVersion = 1;

std::string expect_key(std::istream& is, const std::string& key) {
    std::string k, v;
    if (!(is >> k >> v) || k != key) throw std::runtime_error("model file: expected key '" + key + "'");
    return v;
}

}  // namespace

Precision peek_model_precision(std::istream& is) {
    const auto pos = is.tellg();
    std::string magic, version, key, value;
    is >> magic >> version >> key >> value;
    is.clear();
    is.seekg(pos);
    if (key != "precision") throw std::runtime_error("model file: missing precision header");
    return parse_precision(value);
}

template <NetReal T>
void save_esn(std::ostream& os, const EsnModel<T>& m) {
    const auto& c = m.config;
    os << kEsnMagic << ' ' << kEsnVersion << '\n';
    os << "precision " << to_string(precision_v<T>) << '\n';
    os << "reservoir_size " << c.reservoir_size << '\n';
    os << "leak " << format_real(c.leak) << '\n';
    os << "spectral_radius " << format_real(c.spectral_radius) << '\n';
    os << "input_density " << format_real(c.input_density) << '\n';
    os << "input_std " << format_real(c.input_std) << '\n';
    os << "reservoir_density " << format_real(c.reservoir_density) << '\n';
    os << "reservoir_std " << format_real(c.reservoir_std) << '\n';
    os << "offset " << format_real(c.offset) << '\n';
    os << "noise_std " << format_real(c.noise_std) << '\n';
    os << "ridge_beta " << (c.ridge_beta ? format_real(*c.ridge_beta) : std::string("auto")) << '\n';
    os << "washout " << c.washout << '\n';
    os << "input_scale " << format_real(c.input_scale) << '\n';
    os << "seed " << c.seed << '\n';
    os << "ridge_beta_used " << format_real(m.ridge_beta_used) << '\n';
    os << "trained " << (m.trained ? 1 : 0) << '\n';
    write_matrix(os, "W", m.W);
    write_matrix(os, "W_in", m.W_in);
    write_matrix(os, "W_out", m.W_out);
}

template <NetReal T>
EsnModel<T> load_esn(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != kEsnMagic) throw std::runtime_error("not an ESN model file");
    if (version != kEsnVersion) throw std::runtime_error("unsupported ESN model version " + std::to_string(version));
    const Precision p = parse_precision(expect_key(is, "precision"));
    if (p != precision_v<T>) throw std::runtime_error("ESN model precision mismatch");
    EsnModel<T> m;
    auto& c = m.config;
    c.precision = p;
    c.reservoir_size = std::stoull(expect_key(is, "reservoir_size"));
    c.leak = parse_real<double>(expect_key(is, "leak"));
    c.spectral_radius = parse_real<double>(expect_key(is, "spectral_radius"));
    c.input_density = parse_real<double>(expect_key(is, "input_density"));
    c.input_std = parse_real<double>(expect_key(is, "input_std"));
    c.reservoir_density = parse_real<double>(expect_key(is, "reservoir_density"));
    c.reservoir_std = parse_real<double>(expect_key(is, "reservoir_std"));
    c.offset = parse_real<double>(expect_key(is, "offset"));
    c.noise_std = parse_real<double>(expect_key(is, "noise_std"));
    const std::string beta = expect_key(is, "ridge_beta");
    if (beta != "auto") c.ridge_beta = parse_real<double>(beta);
    c.washout = std::stoull(expect_key(is, "washout"));
    c.input_scale = parse_real<double>(expect_key(is, "input_scale"));
    c.seed = std::stoull(expect_key(is, "seed"));
    m.ridge_beta_used = parse_real<double>(expect_key(is, "ridge_beta_used"));
    m.trained = expect_key(is, "trained") == "1";
    m.W = read_matrix<T>(is, "W");
    m.W_in = read_matrix<T>(is, "W_in");
    m.W_out = read_matrix<T>(is, "W_out");
    const auto n = static_cast<Eigen::Index>(c.reservoir_size);
    if (m.W.rows() != n || m.W.cols() != n || m.W_in.rows() != n || m.W_in.cols() != 4 || m.W_out.rows() != 3 ||
        m.W_out.cols() != n + 4)
        throw std::runtime_error("ESN model file: matrix shapes disagree with reservoir_size");
    return m;
}

#define CHAOSBENCH_INSTANTIATE_ESN(T)                                                                          \
    template struct EsnModel<T>;                                                                               \
    template EsnModel<T> init_esn<T>(const EsnConfig&);                                                        \
    template EsnState<T> reservoir_step(const EsnModel<T>&, const EsnState<T>&, const State3<T>&,              \
                                        ReservoirNoise*);                                                      \
    template Vec<T> readout_features(const State3<T>&, const EsnState<T>&);                                    \
    template State3<T> readout(const EsnModel<T>&, const State3<T>&, const EsnState<T>&);                      \
    template EsnModel<T> train_readout(EsnModel<T>, const std::vector<Trajectory<T>>&);                        \
    template Mat<T> solve_ridge(const Mat<T>&, const Mat<T>&, double);                                         \
    template EsnState<T> warm_up(const EsnModel<T>&, const Trajectory<T>&);                                    \
    template Trajectory<T> predict_closed_loop(const EsnModel<T>&, const Trajectory<T>&, std::size_t);         \
    template Trajectory<T> run_closed_loop(const EsnModel<T>&, EsnState<T>, State3<T>, std::size_t, T);        \
    template DiscreteMap closed_loop_map(const EsnModel<T>&);                                                  \
    template std::vector<double> pack_state(const State3<T>&, const EsnState<T>&);                             \
    template void save_esn(std::ostream&, const EsnModel<T>&);                                                 \
    template EsnModel<T> load_esn<T>(std::istream&);

CHAOSBENCH_INSTANTIATE_ESN(float)
CHAOSBENCH_INSTANTIATE_ESN(double)

}  // namespace chaosbench
