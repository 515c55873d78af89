#include "chaosbench/rnn.hpp"

#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>

#include "chaosbench/errors.hpp"
#include "chaosbench/rng.hpp"

namespace chaosbench {

namespace {

template <NetReal T>
std::span<T> span_of(Mat<T>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
template <NetReal T>
std::span<T> span_of(Vec<T>& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}
template <NetReal T>
std::span<const T> span_of(const Mat<T>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
template <NetReal T>
std::span<const T> span_of(const Vec<T>& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

template <class Blocks>
std::size_t total_size(const Blocks& blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

template <NetReal T>
void fill_uniform(std::span<T> block, CounterRng rng, double bound) {
    for (T& v : block) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

template <NetReal T>
T sigmoid(T z) {
    return T(1) / (T(1) + exp_r(-z));
}

template <NetReal T>
State3<T> unscale(const Eigen::Matrix<T, 3, 1>& y, double scale) {
    const T s = static_cast<T>(scale);
    return {y(0) * s, y(1) * s, y(2) * s};
}

// Scaled inputs of a batch: column t * count + b holds window b at time t.
template <NetReal T>
Mat<T> gather_inputs(const WindowSet<T>& set, std::size_t first, std::size_t count, double scale) {
    const auto w = set.window;
    Mat<T> u(3, static_cast<Eigen::Index>(w * count));
    const T inv = T(1) / static_cast<T>(scale);
    for (std::size_t b = 0; b < count; ++b) {
        const State3<T>* p = set.starts[first + b];
        for (std::size_t t = 0; t < w; ++t) {
            const auto col = static_cast<Eigen::Index>(t * count + b);
            u(0, col) = p[t].x * inv;
            u(1, col) = p[t].y * inv;
            u(2, col) = p[t].z * inv;
        }
    }
    return u;
}

template <NetReal T>
Mat<T> gather_targets(const WindowSet<T>& set, std::size_t first, std::size_t count, double scale) {
    Mat<T> y(3, static_cast<Eigen::Index>(count));
    const T inv = T(1) / static_cast<T>(scale);
    for (std::size_t b = 0; b < count; ++b) {
        const State3<T>& p = *set.targets[first + b];
        y(0, static_cast<Eigen::Index>(b)) = p.x * inv;
        y(1, static_cast<Eigen::Index>(b)) = p.y * inv;
        y(2, static_cast<Eigen::Index>(b)) = p.z * inv;
    }
    return y;
}

// Squared error mean and its gradient with respect to the outputs.
template <NetReal T>
T mse(const Mat<T>& y, const Mat<T>& target, Mat<T>* dy) {
    const Mat<T> r = y - target;
    const T denom = static_cast<T>(r.size());
    if (dy != nullptr) *dy = (T(2) / denom) * r;
    return r.squaredNorm() / denom;
}

template <NetReal T>
Mat<T> window_inputs(std::span<const State3<T>> window, double scale) {
    Mat<T> u(3, static_cast<Eigen::Index>(window.size()));
    const T inv = T(1) / static_cast<T>(scale);
    for (std::size_t t = 0; t < window.size(); ++t) {
        const auto c = static_cast<Eigen::Index>(t);
        u(0, c) = window[t].x * inv;
        u(1, c) = window[t].y * inv;
        u(2, c) = window[t].z * inv;
    }
    return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// LSTM

template <NetReal T>
std::vector<std::span<T>> LstmModel<T>::blocks() {
    return {span_of(W_f), span_of(b_f), span_of(W_i), span_of(b_i), span_of(W_c), span_of(b_c),
            span_of(W_o), span_of(b_o), span_of(W_y), span_of(b_y)};
}

template <NetReal T>
std::vector<std::span<const T>> LstmModel<T>::blocks() const {
    return {span_of(W_f), span_of(b_f), span_of(W_i), span_of(b_i), span_of(W_c), span_of(b_c),
            span_of(W_o), span_of(b_o), span_of(W_y), span_of(b_y)};
}

template <NetReal T>
std::size_t LstmModel<T>::parameter_count() const {
    return total_size(blocks());
}

template <NetReal T>
LstmModel<T> init_lstm(const LstmShape& shape, std::uint64_t seed) {
    if (shape.hidden < 1 || shape.window < 1 || !(shape.scale > 0.0))
        throw std::invalid_argument("init_lstm: hidden, window and scale must be positive");
    LstmModel<T> m;
    m.hidden = shape.hidden;
    m.window = shape.window;
    m.scale = shape.scale;
    const auto h = static_cast<Eigen::Index>(shape.hidden);
    for (Mat<T>* w : {&m.W_f, &m.W_i, &m.W_c, &m.W_o}) w->resize(h, h + 3);
    for (Vec<T>* b : {&m.b_f, &m.b_i, &m.b_c, &m.b_o}) b->resize(h);
    m.W_y.resize(3, h);
    m.b_y.resize(3);

    const CounterRng root(seed);
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden + 3));
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    auto blocks = m.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k)
        fill_uniform(blocks[k], root.split(k), k < 8 ? gate_bound : head_bound);
    return m;
}

template <NetReal T>
void lstm_cell_step(const LstmModel<T>& m, Vec<T>& h, Vec<T>& c, const State3<T>& u) {
    const auto n = static_cast<Eigen::Index>(m.hidden);
    Vec<T> xh(n + 3);
    xh.head(n) = h;
    xh(n) = u.x;
    xh(n + 1) = u.y;
    xh(n + 2) = u.z;
    const Vec<T> f = (m.W_f * xh + m.b_f).unaryExpr([](T z) { return sigmoid(z); });
    const Vec<T> i = (m.W_i * xh + m.b_i).unaryExpr([](T z) { return sigmoid(z); });
    const Vec<T> g = (m.W_c * xh + m.b_c).unaryExpr([](T z) { return tanh_r(z); });
    const Vec<T> o = (m.W_o * xh + m.b_o).unaryExpr([](T z) { return sigmoid(z); });
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.unaryExpr([](T z) { return tanh_r(z); }));
}

template <NetReal T>
State3<T> lstm_predict(const LstmModel<T>& m, std::span<const State3<T>> window) {
    if (window.size() != m.window) throw std::invalid_argument("lstm_predict: window length differs from the model's");
    const auto n = static_cast<Eigen::Index>(m.hidden);
    Vec<T> h = Vec<T>::Zero(n), c = Vec<T>::Zero(n);
    const T inv = T(1) / static_cast<T>(m.scale);
    for (const auto& p : window) lstm_cell_step(m, h, c, State3<T>{p.x * inv, p.y * inv, p.z * inv});
    const Eigen::Matrix<T, 3, 1> y = m.W_y * h + m.b_y;
    return unscale<T>(y, m.scale);
}

template <NetReal T>
T batch_loss(const LstmModel<T>& m, const WindowSet<T>& set, std::size_t first, std::size_t count,
             LstmModel<T>* grad) {
    const auto n = static_cast<Eigen::Index>(m.hidden);
    const auto bsz = static_cast<Eigen::Index>(count);
    const std::size_t w = set.window;
    const Mat<T> u = gather_inputs(set, first, count, m.scale);
    const Mat<T> target = gather_targets(set, first, count, m.scale);

    // Per time step caches: xh = [h_prev; u], gates and the new cell state.
    std::vector<Mat<T>> xh(w), f(w), in(w), g(w), o(w), c(w + 1);
    c[0] = Mat<T>::Zero(n, bsz);
    Mat<T> h = Mat<T>::Zero(n, bsz);
    for (std::size_t t = 0; t < w; ++t) {
        xh[t].resize(n + 3, bsz);
        xh[t].topRows(n) = h;
        xh[t].bottomRows(3) = u.middleCols(static_cast<Eigen::Index>(t) * bsz, bsz);
        f[t] = ((m.W_f * xh[t]).colwise() + m.b_f).unaryExpr([](T z) { return sigmoid(z); });
        in[t] = ((m.W_i * xh[t]).colwise() + m.b_i).unaryExpr([](T z) { return sigmoid(z); });
        g[t] = ((m.W_c * xh[t]).colwise() + m.b_c).unaryExpr([](T z) { return tanh_r(z); });
        o[t] = ((m.W_o * xh[t]).colwise() + m.b_o).unaryExpr([](T z) { return sigmoid(z); });
        c[t + 1] = f[t].cwiseProduct(c[t]) + in[t].cwiseProduct(g[t]);
        h = o[t].cwiseProduct(c[t + 1].unaryExpr([](T z) { return tanh_r(z); }));
    }
    const Mat<T> y = (m.W_y * h).colwise() + m.b_y;
    Mat<T> dy;
    const T loss = mse<T>(y, target, grad != nullptr ? &dy : nullptr);
    if (grad == nullptr) return loss;

    LstmModel<T>& gm = *grad;
    gm.hidden = m.hidden;
    gm.window = m.window;
    gm.scale = m.scale;
    for (Mat<T>* wm : {&gm.W_f, &gm.W_i, &gm.W_c, &gm.W_o}) *wm = Mat<T>::Zero(n, n + 3);
    for (Vec<T>* b : {&gm.b_f, &gm.b_i, &gm.b_c, &gm.b_o}) *b = Vec<T>::Zero(n);
    gm.W_y = dy * h.transpose();
    gm.b_y = dy.rowwise().sum();

    Mat<T> dh = m.W_y.transpose() * dy;
    Mat<T> dc = Mat<T>::Zero(n, bsz);
    for (std::size_t t = w; t-- > 0;) {
        const Mat<T> tc = c[t + 1].unaryExpr([](T z) { return tanh_r(z); });
        dc += dh.cwiseProduct(o[t]).cwiseProduct((T(1) - tc.array().square()).matrix());
        const Mat<T> dzo = dh.cwiseProduct(tc).cwiseProduct(o[t].cwiseProduct((T(1) - o[t].array()).matrix()));
        const Mat<T> dzf =
            dc.cwiseProduct(c[t]).cwiseProduct(f[t].cwiseProduct((T(1) - f[t].array()).matrix()));
        const Mat<T> dzi =
            dc.cwiseProduct(g[t]).cwiseProduct(in[t].cwiseProduct((T(1) - in[t].array()).matrix()));
        const Mat<T> dzg = dc.cwiseProduct(in[t]).cwiseProduct((T(1) - g[t].array().square()).matrix());

        gm.W_f.noalias() += dzf * xh[t].transpose();
        gm.W_i.noalias() += dzi * xh[t].transpose();
        gm.W_c.noalias() += dzg * xh[t].transpose();
        gm.W_o.noalias() += dzo * xh[t].transpose();
        gm.b_f += dzf.rowwise().sum();
        gm.b_i += dzi.rowwise().sum();
        gm.b_c += dzg.rowwise().sum();
        gm.b_o += dzo.rowwise().sum();

        if (t > 0) {
            Mat<T> dxh = m.W_f.transpose() * dzf;
            dxh.noalias() += m.W_i.transpose() * dzi;
            dxh.noalias() += m.W_c.transpose() * dzg;
            dxh.noalias() += m.W_o.transpose() * dzo;
            dh = dxh.topRows(n);
            dc = dc.cwiseProduct(f[t]);
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// TCN

template <NetReal T>
std::size_t TcnModel<T>::receptive_field() const {
    std::size_t s = 0;
    for (auto d : dilations) s += d;
    return 1 + (kernel - 1) * s;
}

template <NetReal T>
std::vector<std::span<T>> TcnModel<T>::blocks() {
    std::vector<std::span<T>> out;
    for (std::size_t l = 0; l < layers(); ++l) {
        for (auto& tap : taps[l]) out.push_back(span_of(tap));
        out.push_back(span_of(bias[l]));
    }
    out.push_back(span_of(W_y));
    out.push_back(span_of(b_y));
    return out;
}

template <NetReal T>
std::vector<std::span<const T>> TcnModel<T>::blocks() const {
    std::vector<std::span<const T>> out;
    for (std::size_t l = 0; l < layers(); ++l) {
        for (const auto& tap : taps[l]) out.push_back(span_of(tap));
        out.push_back(span_of(bias[l]));
    }
    out.push_back(span_of(W_y));
    out.push_back(span_of(b_y));
    return out;
}

template <NetReal T>
std::size_t TcnModel<T>::parameter_count() const {
    return total_size(blocks());
}

void TcnShape::validate() const {
    if (in_channels < 1 || kernel < 1 || width < 1 || window < 1 || !(scale > 0.0))
        throw std::invalid_argument("tcn: channels, kernel, width, window and scale must be positive");
    if (dilations.empty()) throw std::invalid_argument("tcn: at least one layer");
    for (std::size_t l = 0; l < dilations.size(); ++l) {
        const auto d = dilations[l];
        if (d == 0 || (d & (d - 1)) != 0) throw std::invalid_argument("tcn: dilations must be powers of two");
        if (l > 0 && d <= dilations[l - 1]) throw std::invalid_argument("tcn: dilations must strictly increase");
    }
    std::size_t s = 0;
    for (auto d : dilations) s += d;
    if (1 + (kernel - 1) * s < window) throw std::invalid_argument("tcn: receptive field shorter than the window");
}

template <NetReal T>
TcnModel<T> init_tcn(const TcnShape& shape, std::uint64_t seed) {
    shape.validate();
    TcnModel<T> m;
    m.in_channels = shape.in_channels;
    m.kernel = shape.kernel;
    m.dilations = shape.dilations;
    m.channels.assign(shape.dilations.size(), shape.width);
    m.window = shape.window;
    m.scale = shape.scale;
    m.taps.resize(m.layers());
    m.bias.resize(m.layers());
    for (std::size_t l = 0; l < m.layers(); ++l) {
        m.taps[l].assign(m.kernel, Mat<T>(static_cast<Eigen::Index>(m.channels[l]),
                                          static_cast<Eigen::Index>(m.layer_inputs(l))));
        m.bias[l].resize(static_cast<Eigen::Index>(m.channels[l]));
    }
    m.W_y.resize(3, static_cast<Eigen::Index>(m.channels.back()));
    m.b_y.resize(3);

    const CounterRng root(seed);
    auto blocks = m.blocks();
    std::size_t k = 0;
    for (std::size_t l = 0; l < m.layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_inputs(l) * m.kernel));
        for (std::size_t i = 0; i <= m.kernel; ++i, ++k) fill_uniform(blocks[k], root.split(k), bound);
    }
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(m.channels.back()));
    fill_uniform(blocks[k], root.split(k), head_bound);
    fill_uniform(blocks[k + 1], root.split(k + 1), head_bound);
    return m;
}

namespace {

// Forward pass over a batch laid out as columns t * bsz + b. zs[l] holds the
// pre-activation of layer l, as[l] its input (as[0] is the network input).
template <NetReal T>
void tcn_forward_batch(const TcnModel<T>& m, const Mat<T>& input, Eigen::Index bsz, std::vector<Mat<T>>& as,
                       std::vector<Mat<T>>& zs) {
    const std::size_t nl = m.layers();
    const Eigen::Index cols = input.cols();
    as.resize(nl + 1);
    zs.resize(nl);
    as[0] = input;
    for (std::size_t l = 0; l < nl; ++l) {
        Mat<T>& z = zs[l];
        z = m.bias[l].replicate(1, cols);
        for (std::size_t i = 0; i < m.kernel; ++i) {
            const Eigen::Index shift = static_cast<Eigen::Index>(m.dilations[l] * i) * bsz;
            if (shift >= cols) break;
            z.rightCols(cols - shift).noalias() += m.taps[l][i] * as[l].leftCols(cols - shift);
        }
        as[l + 1] = l + 1 < nl ? Mat<T>(z.cwiseMax(T(0))) : z;
    }
}

}  // namespace

template <NetReal T>
Mat<T> tcn_stack(const TcnModel<T>& m, const Mat<T>& input) {
    if (input.rows() != static_cast<Eigen::Index>(m.in_channels))
        throw std::invalid_argument("tcn_stack: input channel count differs from the model's");
    std::vector<Mat<T>> as, zs;
    tcn_forward_batch(m, input, 1, as, zs);
    return as.back();
}

template <NetReal T>
State3<T> tcn_forward(const TcnModel<T>& m, std::span<const State3<T>> window) {
    if (window.empty() || window.size() != m.window)
        throw std::invalid_argument("tcn_forward: window length differs from the model's");
    const Mat<T> top = tcn_stack(m, window_inputs(window, m.scale));
    const Eigen::Matrix<T, 3, 1> y = m.W_y * top.rightCols(1) + m.b_y;
    return unscale<T>(y, m.scale);
}

template <NetReal T>
T batch_loss(const TcnModel<T>& m, const WindowSet<T>& set, std::size_t first, std::size_t count,
             TcnModel<T>* grad) {
    const auto bsz = static_cast<Eigen::Index>(count);
    const Mat<T> u = gather_inputs(set, first, count, m.scale);
    const Mat<T> target = gather_targets(set, first, count, m.scale);
    std::vector<Mat<T>> as, zs;
    tcn_forward_batch(m, u, bsz, as, zs);
    const Eigen::Index cols = u.cols();
    const Mat<T> y = (m.W_y * as.back().rightCols(bsz)).colwise() + m.b_y;
    Mat<T> dy;
    const T loss = mse<T>(y, target, grad != nullptr ? &dy : nullptr);
    if (grad == nullptr) return loss;

    TcnModel<T>& gm = *grad;
    gm = m;
    gm.W_y = dy * as.back().rightCols(bsz).transpose();
    gm.b_y = dy.rowwise().sum();

    const std::size_t nl = m.layers();
    Mat<T> da = Mat<T>::Zero(as.back().rows(), cols);
    da.rightCols(bsz) = m.W_y.transpose() * dy;
    for (std::size_t l = nl; l-- > 0;) {
        Mat<T> dz = da;
        if (l + 1 < nl) dz.array() *= (zs[l].array() > T(0)).template cast<T>();
        gm.bias[l] = dz.rowwise().sum();
        Mat<T> da_prev;
        if (l > 0) da_prev = Mat<T>::Zero(as[l].rows(), cols);
        for (std::size_t i = 0; i < m.kernel; ++i) {
            const Eigen::Index shift = static_cast<Eigen::Index>(m.dilations[l] * i) * bsz;
            if (shift >= cols) {
                gm.taps[l][i].setZero();
                continue;
            }
            gm.taps[l][i].noalias() = dz.rightCols(cols - shift) * as[l].leftCols(cols - shift).transpose();
            if (l > 0) da_prev.leftCols(cols - shift).noalias() += m.taps[l][i].transpose() * dz.rightCols(cols - shift);
        }
        if (l > 0) da = std::move(da_prev);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
    if (window < 1 || batch < 1 || epochs < 1) throw std::invalid_argument("train: window, batch and epochs must be >= 1");
    if (!(lr > 0.0) || !(lr_decay > 0.0)) throw std::invalid_argument("train: lr and lr_decay must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("train: Adam betas must be in [0, 1)");
    if (precision == Precision::Extended) throw std::invalid_argument("train: networks run at single or double");
}

template <NetReal T>
WindowSet<T> make_windows(const std::vector<Trajectory<T>>& trajs, std::size_t window) {
    if (window < 1) throw std::invalid_argument("make_windows: window must be >= 1");
    WindowSet<T> set;
    set.window = window;
    for (const auto& t : trajs)
        for (std::size_t s = 0; s + window < t.size(); ++s) {
            set.starts.push_back(&t.points[s]);
            set.targets.push_back(&t.points[s + window]);
        }
    return set;
}

namespace {

template <NetReal T>
struct Adam {
    std::vector<std::vector<T>> m1, m2;
    std::size_t step = 0;

    template <class Blocks>
    explicit Adam(const Blocks& blocks) {
        for (const auto& b : blocks) {
            m1.emplace_back(b.size(), T(0));
            m2.emplace_back(b.size(), T(0));
        }
    }

    void update(std::vector<std::span<T>> params, const std::vector<std::span<const T>>& grads, double lr,
                const TrainConfig& cfg) {
        ++step;
        const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
        const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
        const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
        const T rate = static_cast<T>(lr), eps = static_cast<T>(cfg.adam_eps);
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& a = m1[k];
            auto& v = m2[k];
            for (std::size_t j = 0; j < params[k].size(); ++j) {
                const T gj = grads[k][j];
                a[j] = b1 * a[j] + (T(1) - b1) * gj;
                v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
                params[k][j] -= rate * (a[j] / c1) / (sqrt_r(v[j] / c2) + eps);
            }
        }
    }
};

template <NetReal T, class Model>
TrainResult<Model> train_generic(Model m, const std::vector<Trajectory<T>>& trajs, const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.precision != precision_v<T>) throw std::invalid_argument("train_rnn: config precision differs from the model's");
    if (cfg.window != m.window) throw std::invalid_argument("train_rnn: config window differs from the model's");
    const WindowSet<T> set = make_windows(trajs, cfg.window);
    if (set.size() == 0) throw std::invalid_argument("train_rnn: trajectories too short for one window");

    TrainResult<Model> out;
    Adam<T> adam(m.blocks());
    Model grad;
    double lr = cfg.lr;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t first = 0; first < set.size(); first += cfg.batch, ++batch_index) {
            const std::size_t count = std::min(cfg.batch, set.size() - first);
            const T loss = batch_loss(m, set, first, count, &grad);
            if (!finite_r(loss)) throw TrainingDiverged(epoch, batch_index);
            sum += static_cast<double>(loss) * static_cast<double>(count);
            const Model& cg = grad;
            adam.update(m.blocks(), cg.blocks(), lr, cfg);
        }
        out.epoch_loss.push_back(sum / static_cast<double>(set.size()));
        lr *= cfg.lr_decay;
    }
    out.model = std::move(m);
    return out;
}

// Central differences at h = 1e-6 carry roundoff of about 1e-11 absolute, so
// smaller gradients are compared in absolute terms against this floor.
constexpr double kGradientFloor = 1e-6;

template <class Model>
GradientCheck gradient_check_generic(const Model& m, const WindowSet<double>& set, std::size_t coords,
                                     std::uint64_t seed, double h) {
    if (set.size() == 0) throw std::invalid_argument("gradient_check: empty window set");
    Model grad;
    batch_loss(m, set, 0, set.size(), &grad);
    const Model& cg = grad;
    const auto gblocks = cg.blocks();
    const std::size_t total = total_size(gblocks);

    Model probe = m;
    auto pblocks = probe.blocks();
    CounterRng rng(seed);
    GradientCheck out;
    for (std::size_t k = 0; k < coords; ++k) {
        std::size_t idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total));
        std::size_t b = 0;
        while (idx >= pblocks[b].size()) idx -= pblocks[b++].size();
        double& p = pblocks[b][idx];
        const double saved = p;
        p = saved + h;
        const double lp = batch_loss(probe, set, 0, set.size(), static_cast<Model*>(nullptr));
        p = saved - h;
        const double lm = batch_loss(probe, set, 0, set.size(), static_cast<Model*>(nullptr));
        p = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = gblocks[b][idx];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), kGradientFloor});
        out.max_rel_error = std::max(out.max_rel_error, rel);
        ++out.coordinates;
    }
    return out;
}

}  // namespace

template <NetReal T>
TrainResult<LstmModel<T>> train_rnn(LstmModel<T> m, const std::vector<Trajectory<T>>& trajs, const TrainConfig& cfg) {
    return train_generic<T>(std::move(m), trajs, cfg);
}

template <NetReal T>
TrainResult<TcnModel<T>> train_rnn(TcnModel<T> m, const std::vector<Trajectory<T>>& trajs, const TrainConfig& cfg) {
    return train_generic<T>(std::move(m), trajs, cfg);
}

GradientCheck gradient_check(const LstmModel<double>& m, const WindowSet<double>& set, std::size_t coords,
                             std::uint64_t seed, double h) {
    return gradient_check_generic(m, set, coords, seed, h);
}

GradientCheck gradient_check(const TcnModel<double>& m, const WindowSet<double>& set, std::size_t coords,
                             std::uint64_t seed, double h) {
    return gradient_check_generic(m, set, coords, seed, h);
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

template <NetReal T>
State3<T> forecast(const LstmModel<T>& m, std::span<const State3<T>> w) {
    return lstm_predict(m, w);
}

template <NetReal T>
State3<T> forecast(const TcnModel<T>& m, std::span<const State3<T>> w) {
    return tcn_forward(m, w);
}

template <NetReal T, class Model>
Trajectory<T> closed_loop_generic(const Model& m, const Trajectory<T>& warm, std::size_t n) {
    if (warm.size() < m.window) throw std::invalid_argument("predict_closed_loop: warm-up shorter than the window");
    std::vector<State3<T>> buf(warm.points.end() - static_cast<std::ptrdiff_t>(m.window), warm.points.end());
    Trajectory<T> out;
    out.system = warm.system;
    out.dt = warm.dt;
    out.provenance = "rnn";
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const State3<T> y = forecast(m, std::span<const State3<T>>(buf));
        if (!y.finite()) throw PredictionDiverged(i);
        out.points.push_back(y);
        std::move(buf.begin() + 1, buf.end(), buf.begin());
        buf.back() = y;
    }
    return out;
}

template <NetReal T, class Model>
DiscreteMap closed_loop_map_generic(const Model& m) {
    auto model = std::make_shared<const Model>(m);
    const std::size_t w = m.window;
    DiscreteMap map;
    map.dim = 3 * w;
    map.step = [model, w](std::vector<double>& s) {
        std::vector<State3<T>> buf(w);
        for (std::size_t t = 0; t < w; ++t)
            buf[t] = {static_cast<T>(s[3 * t]), static_cast<T>(s[3 * t + 1]), static_cast<T>(s[3 * t + 2])};
        const State3<T> y = forecast(*model, std::span<const State3<T>>(buf));
        std::move(s.begin() + 3, s.end(), s.begin());
        s[3 * w - 3] = static_cast<double>(y.x);
        s[3 * w - 2] = static_cast<double>(y.y);
        s[3 * w - 1] = static_cast<double>(y.z);
    };
    map.tangent = finite_difference_tangent(map.step, std::is_same_v<T, float> ? 1e-3 : 1e-6);
    return map;
}

}  // namespace

template <NetReal T>
Trajectory<T> predict_closed_loop(const LstmModel<T>& m, const Trajectory<T>& warm, std::size_t n) {
    return closed_loop_generic<T>(m, warm, n);
}

template <NetReal T>
Trajectory<T> predict_closed_loop(const TcnModel<T>& m, const Trajectory<T>& warm, std::size_t n) {
    return closed_loop_generic<T>(m, warm, n);
}

template <NetReal T>
DiscreteMap closed_loop_map(const LstmModel<T>& m) {
    return closed_loop_map_generic<T>(m);
}

template <NetReal T>
DiscreteMap closed_loop_map(const TcnModel<T>& m) {
    return closed_loop_map_generic<T>(m);
}

template <NetReal T>
std::vector<double> window_state(const Trajectory<T>& t, std::size_t window) {
    if (t.size() < window) throw std::invalid_argument("window_state: trajectory shorter than the window");
    std::vector<double> s;
    s.reserve(3 * window);
    for (std::size_t k = t.size() - window; k < t.size(); ++k) {
        s.push_back(static_cast<double>(t.points[k].x));
        s.push_back(static_cast<double>(t.points[k].y));
        s.push_back(static_cast<double>(t.points[k].z));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <NetReal T>
void write_vec(std::ostream& os, const std::string& name, const Vec<T>& v) {
    write_matrix(os, name, Mat<T>(v));
}

template <NetReal T>
Vec<T> read_vec(std::istream& is, const std::string& name) {
    const Mat<T> m = read_matrix<T>(is, name);
    if (m.cols() != 1) throw std::runtime_error("model file: '" + name + "' must be a column");
    return m;
}

std::string read_key(std::istream& is, const std::string& key) {
    std::string k, v;
    if (!(is >> k >> v) || k != key) throw std::runtime_error("model file: expected key '" + key + "'");
    return v;
}

void read_header(std::istream& is, const std::string& magic, Precision want) {
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != magic) throw std::runtime_error("not a " + magic + " model file");
    if (version != 1) throw std::runtime_error("unsupported " + magic + " model version " + std::to_string(version));
    if (parse_precision(read_key(is, "precision")) != want) throw std::runtime_error(magic + " model precision mismatch");
}

std::vector<std::size_t> read_list(std::istream& is, const std::string& key, std::size_t n) {
    std::string k;
    if (!(is >> k) || k != key) throw std::runtime_error("model file: expected key '" + key + "'");
    std::vector<std::size_t> out(n);
    for (auto& v : out)
        if (!(is >> v)) throw std::runtime_error("model file: truncated list '" + key + "'");
    return out;
}

}  // namespace

template <NetReal T>
void save_lstm(std::ostream& os, const LstmModel<T>& m) {
    os << "chaosbench-lstm 1\n";
    os << "precision " << to_string(precision_v<T>) << '\n';
    os << "hidden " << m.hidden << '\n';
    os << "window " << m.window << '\n';
    os << "scale " << format_real(m.scale) << '\n';
    write_matrix(os, "W_f", m.W_f);
    write_vec(os, "b_f", m.b_f);
    write_matrix(os, "W_i", m.W_i);
    write_vec(os, "b_i", m.b_i);
    write_matrix(os, "W_c", m.W_c);
    write_vec(os, "b_c", m.b_c);
    write_matrix(os, "W_o", m.W_o);
    write_vec(os, "b_o", m.b_o);
    write_matrix(os, "W_y", m.W_y);
    write_vec(os, "b_y", m.b_y);
}

template <NetReal T>
LstmModel<T> load_lstm(std::istream& is) {
    read_header(is, "chaosbench-lstm", precision_v<T>);
    LstmModel<T> m;
    m.hidden = std::stoull(read_key(is, "hidden"));
    m.window = std::stoull(read_key(is, "window"));
    m.scale = parse_real<double>(read_key(is, "scale"));
    m.W_f = read_matrix<T>(is, "W_f");
    m.b_f = read_vec<T>(is, "b_f");
    m.W_i = read_matrix<T>(is, "W_i");
    m.b_i = read_vec<T>(is, "b_i");
    m.W_c = read_matrix<T>(is, "W_c");
    m.b_c = read_vec<T>(is, "b_c");
    m.W_o = read_matrix<T>(is, "W_o");
    m.b_o = read_vec<T>(is, "b_o");
    m.W_y = read_matrix<T>(is, "W_y");
    m.b_y = read_vec<T>(is, "b_y");
    const auto n = static_cast<Eigen::Index>(m.hidden);
    for (const Mat<T>* w : {&m.W_f, &m.W_i, &m.W_c, &m.W_o})
        if (w->rows() != n || w->cols() != n + 3) throw std::runtime_error("LSTM model file: gate shape mismatch");
    if (m.W_y.rows() != 3 || m.W_y.cols() != n || m.b_y.size() != 3)
        throw std::runtime_error("LSTM model file: head shape mismatch");
    return m;
}

template <NetReal T>
void save_tcn(std::ostream& os, const TcnModel<T>& m) {
    os << "chaosbench-tcn 1\n";
    os << "precision " << to_string(precision_v<T>) << '\n';
    os << "in_channels " << m.in_channels << '\n';
    os << "kernel " << m.kernel << '\n';
    os << "layers " << m.layers() << '\n';
    os << "dilations";
    for (auto d : m.dilations) os << ' ' << d;
    os << "\nchannels";
    for (auto c : m.channels) os << ' ' << c;
    os << "\nwindow " << m.window << '\n';
    os << "scale " << format_real(m.scale) << '\n';
    for (std::size_t l = 0; l < m.layers(); ++l) {
        for (std::size_t i = 0; i < m.kernel; ++i)
            write_matrix(os, "tap_" + std::to_string(l) + "_" + std::to_string(i), m.taps[l][i]);
        write_vec(os, "bias_" + std::to_string(l), m.bias[l]);
    }
    write_matrix(os, "W_y", m.W_y);
    write_vec(os, "b_y", m.b_y);
}

template <NetReal T>
TcnModel<T> load_tcn(std::istream& is) {
    read_header(is, "chaosbench-tcn", precision_v<T>);
    TcnModel<T> m;
    m.in_channels = std::stoull(read_key(is, "in_channels"));
    m.kernel = std::stoull(read_key(is, "kernel"));
    const std::size_t layers = std::stoull(read_key(is, "layers"));
    m.dilations = read_list(is, "dilations", layers);
    m.channels = read_list(is, "channels", layers);
    m.window = std::stoull(read_key(is, "window"));
    m.scale = parse_real<double>(read_key(is, "scale"));
    m.taps.resize(layers);
    m.bias.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        for (std::size_t i = 0; i < m.kernel; ++i) {
            m.taps[l].push_back(read_matrix<T>(is, "tap_" + std::to_string(l) + "_" + std::to_string(i)));
            const Mat<T>& tap = m.taps[l].back();
            if (tap.rows() != static_cast<Eigen::Index>(m.channels[l]) ||
                tap.cols() != static_cast<Eigen::Index>(m.layer_inputs(l)))
                throw std::runtime_error("TCN model file: tap shape mismatch");
        }
        m.bias[l] = read_vec<T>(is, "bias_" + std::to_string(l));
    }
    m.W_y = read_matrix<T>(is, "W_y");
    m.b_y = read_vec<T>(is, "b_y");
    return m;
}

#define CHAOSBENCH_INSTANTIATE_RNN(T)                                                                           \
    template struct LstmModel<T>;                                                                               \
    template struct TcnModel<T>;                                                                                \
    template LstmModel<T> init_lstm<T>(const LstmShape&, std::uint64_t);                                        \
    template void lstm_cell_step(const LstmModel<T>&, Vec<T>&, Vec<T>&, const State3<T>&);                      \
    template State3<T> lstm_predict(const LstmModel<T>&, std::span<const State3<T>>);                           \
    template TcnModel<T> init_tcn<T>(const TcnShape&, std::uint64_t);                                           \
    template Mat<T> tcn_stack(const TcnModel<T>&, const Mat<T>&);                                               \
    template State3<T> tcn_forward(const TcnModel<T>&, std::span<const State3<T>>);                             \
    template WindowSet<T> make_windows(const std::vector<Trajectory<T>>&, std::size_t);                         \
    template T batch_loss(const LstmModel<T>&, const WindowSet<T>&, std::size_t, std::size_t, LstmModel<T>*);   \
    template T batch_loss(const TcnModel<T>&, const WindowSet<T>&, std::size_t, std::size_t, TcnModel<T>*);     \
    template TrainResult<LstmModel<T>> train_rnn(LstmModel<T>, const std::vector<Trajectory<T>>&,               \
                                                 const TrainConfig&);                                           \
    template TrainResult<TcnModel<T>> train_rnn(TcnModel<T>, const std::vector<Trajectory<T>>&,                 \
                                                const TrainConfig&);                                            \
    template Trajectory<T> predict_closed_loop(const LstmModel<T>&, const Trajectory<T>&, std::size_t);         \
    template Trajectory<T> predict_closed_loop(const TcnModel<T>&, const Trajectory<T>&, std::size_t);          \
    template DiscreteMap closed_loop_map(const LstmModel<T>&);                                                  \
    template DiscreteMap closed_loop_map(const TcnModel<T>&);                                                   \
    template std::vector<double> window_state(const Trajectory<T>&, std::size_t);                               \
    template void save_lstm(std::ostream&, const LstmModel<T>&);                                                \
    template LstmModel<T> load_lstm<T>(std::istream&);                                                          \
    template void save_tcn(std::ostream&, const TcnModel<T>&);                                                  \
    template TcnModel<T> load_tcn<T>(std::istream&);

CHAOSBENCH_INSTANTIATE_RNN(float)
CHAOSBENCH_INSTANTIATE_RNN(double)

}  // namespace chaosbench
