#include <cmath>
#include <sstream>

#include "doctest.h"

#include "chaosbench/rng.hpp"
#include "chaosbench/rnn.hpp"

using namespace chaosbench;

namespace {

Trajectory<double> lorenz_data(std::size_t n) {
    const auto field = default_field<double>(System::Lorenz);
    return integrate(advance(State3<double>{0.0, 0.45, 1.41}, 1000, 0.02, field), n, 0.02, field);
}

template <class M>
void zero_all(M& m) {
    for (auto b : m.blocks())
        for (auto& v : b) v = 0;
}

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One LSTM cell update with explicit loops over the gate rows.
void oracle_cell(const LstmModel<double>& m, std::vector<double>& h, std::vector<double>& c, const double u[3]) {
    const std::size_t n = m.hidden;
    std::vector<double> xh(h);
    xh.insert(xh.end(), u, u + 3);
    std::vector<double> hn(n), cn(n);
    for (std::size_t r = 0; r < n; ++r) {
        double zf = m.b_f(r), zi = m.b_i(r), zc = m.b_c(r), zo = m.b_o(r);
        for (std::size_t k = 0; k < n + 3; ++k) {
            zf += m.W_f(r, k) * xh[k];
            zi += m.W_i(r, k) * xh[k];
            zc += m.W_c(r, k) * xh[k];
            zo += m.W_o(r, k) * xh[k];
        }
        cn[r] = sig(zf) * c[r] + sig(zi) * std::tanh(zc);
        hn[r] = sig(zo) * std::tanh(cn[r]);
    }
    h = hn;
    c = cn;
}

template <class T>
std::span<const State3<T>> head(const Trajectory<T>& t, std::size_t from, std::size_t len) {
    return {t.points.data() + from, len};
}

}  // namespace

TEST_CASE("LSTM cell") {
    LstmModel<double> m = init_lstm<double>(LstmShape{5, 4, 1.0}, 9);
    SUBCASE("zero weights") {
        zero_all(m);
        Vec<double> h = Vec<double>::Zero(5), c = Vec<double>::Zero(5);
        lstm_cell_step(m, h, c, State3<double>{0.3, -0.2, 0.7});
        CHECK(h.isZero(0));
        CHECK(c.isZero(0));
    }
    SUBCASE("saturated forget gate keeps the cell") {
        zero_all(m);
        m.b_f.setConstant(40.0);
        Vec<double> h = Vec<double>::Zero(5);
        Vec<double> c = Vec<double>::LinSpaced(5, -1.0, 1.0);
        const Vec<double> v = c;
        lstm_cell_step(m, h, c, State3<double>{1, 2, 3});
        CHECK((c - v).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((h - 0.5 * v.array().tanh().matrix()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("random model matches a loop evaluation") {
        Vec<double> h = Vec<double>::LinSpaced(5, -0.3, 0.4), c = Vec<double>::LinSpaced(5, 0.5, -0.2);
        std::vector<double> oh(h.data(), h.data() + 5), oc(c.data(), c.data() + 5);
        const double u[3] = {0.1, -0.4, 0.9};
        lstm_cell_step(m, h, c, State3<double>{u[0], u[1], u[2]});
        oracle_cell(m, oh, oc, u);
        for (int i = 0; i < 5; ++i) {
            CHECK(std::abs(h(i) - oh[i]) <= 1e-14 * std::max(1.0, std::abs(oh[i])));
            CHECK(std::abs(c(i) - oc[i]) <= 1e-14 * std::max(1.0, std::abs(oc[i])));
        }
    }
}

TEST_CASE("LSTM prediction") {
    const auto data = lorenz_data(100);
    auto m = init_lstm<double>(LstmShape{16, 35, 30.0}, 4);
    CHECK(m.parameter_count() == 4 * (16 * 19 + 16) + 3 * 16 + 3);

    const auto y = lstm_predict(m, head(data, 0, 35));
    auto swapped = std::vector<State3<double>>(data.points.begin(), data.points.begin() + 35);
    std::swap(swapped[0], swapped[1]);
    CHECK_FALSE(lstm_predict(m, std::span<const State3<double>>(swapped)) == y);

    CHECK_THROWS_AS(lstm_predict(m, head(data, 0, 34)), std::invalid_argument);

    LstmModel<double> z = init_lstm<double>(LstmShape{16, 35, 1.0}, 4);
    zero_all(z);
    z.b_y << 0.5, -1.5, 2.0;
    const auto out = lstm_predict(z, head(data, 0, 35));
    CHECK(out == State3<double>{0.5, -1.5, 2.0});
}

TEST_CASE("parameter counts of the default architectures") {
    CHECK(init_lstm<double>(LstmShape{}, 0).parameter_count() == 17603);
    // 3*3*64 + 64, then 4 x (3*64*64 + 64), then 64*3 + 3
    CHECK(init_tcn<double>(TcnShape{}, 0).parameter_count() == 50243);
    CHECK(init_tcn<double>(TcnShape{}, 0).receptive_field() == 63);
}

TEST_CASE("TCN convolution") {
    SUBCASE("delta filter passes the input to the head") {
        TcnShape s;
        s.kernel = 1;
        s.dilations = {1};
        s.width = 3;
        s.window = 1;
        s.scale = 1.0;
        auto m = init_tcn<double>(s, 3);
        m.taps[0][0].setIdentity();
        m.bias[0].setZero();
        const State3<double> u{0.7, -1.1, 2.5};
        const std::vector<State3<double>> w{u};
        const auto y = tcn_forward(m, std::span<const State3<double>>(w));
        const Vec<double> want = m.W_y * Eigen::Vector3d(u.x, u.y, u.z) + m.b_y;
        CHECK(std::abs(y.x - want(0)) < 1e-15);
        CHECK(std::abs(y.y - want(1)) < 1e-15);
        CHECK(std::abs(y.z - want(2)) < 1e-15);
    }
    SUBCASE("k = 2, d = 2 scalar channel") {
        TcnShape s;
        s.in_channels = 1;
        s.kernel = 2;
        s.dilations = {2};
        s.width = 1;
        s.window = 3;
        auto m = init_tcn<double>(s, 3);
        m.taps[0][0](0, 0) = 1;
        m.taps[0][1](0, 0) = 1;
        m.bias[0].setZero();
        Mat<double> u(1, 6);
        u << 1, 2, 4, 8, 16, 32;
        const Mat<double> out = tcn_stack(m, u);
        const double want[6] = {1, 2, 4 + 1, 8 + 2, 16 + 4, 32 + 8};
        for (int n = 0; n < 6; ++n) CHECK(out(0, n) == want[n]);
    }
    SUBCASE("later entries never reach earlier outputs") {
        const auto m = init_tcn<double>(TcnShape{}, 8);
        CounterRng rng(8);
        Mat<double> u(3, 35);
        for (Eigen::Index j = 0; j < u.cols(); ++j)
            for (Eigen::Index i = 0; i < 3; ++i) u(i, j) = rng.uniform() - 0.5;
        const Mat<double> base = tcn_stack(m, u);
        for (Eigen::Index j : {0, 1, 10, 20, 34}) {
            Mat<double> p = u;
            p(1, j) += 0.25;
            const Mat<double> out = tcn_stack(m, p);
            CHECK(out.leftCols(j) == base.leftCols(j));
            CHECK(out.col(j) != base.col(j));
        }
    }
    SUBCASE("window checks") {
        const auto m = init_tcn<double>(TcnShape{}, 1);
        const auto data = lorenz_data(50);
        CHECK_NOTHROW(tcn_forward(m, head(data, 0, 35)));
        CHECK_THROWS_AS(tcn_forward(m, head(data, 0, 36)), std::invalid_argument);
        CHECK_THROWS_AS(tcn_forward(m, std::span<const State3<double>>()), std::invalid_argument);
    }
    SUBCASE("shape validation") {
        TcnShape s;
        s.dilations = {1, 2};
        CHECK_THROWS(s.validate());
        s.window = 7;
        CHECK_NOTHROW(s.validate());
        s.dilations = {1, 3};
        CHECK_THROWS(s.validate());
        s.dilations = {2, 1};
        CHECK_THROWS(s.validate());
    }
}

TEST_CASE("windows") {
    const std::vector<Trajectory<double>> trajs{lorenz_data(49), lorenz_data(9)};
    const auto set = make_windows(trajs, 5);
    CHECK(set.size() == (50 - 5) + (10 - 5));
    CHECK(set.starts[0] == &trajs[0].points[0]);
    CHECK(set.targets[0] == &trajs[0].points[5]);
    CHECK(set.starts[45] == &trajs[1].points[0]);
}

TEST_CASE("gradients match central differences") {
    const std::vector<Trajectory<double>> trajs{lorenz_data(300)};
    SUBCASE("zero model on zero data") {
        Trajectory<double> zeros;
        zeros.points.assign(40, State3<double>{});
        const std::vector<Trajectory<double>> zt{zeros};
        const auto set = make_windows(zt, 6);
        auto m = init_lstm<double>(LstmShape{4, 6, 30.0}, 1);
        zero_all(m);
        LstmModel<double> g = m;
        CHECK(batch_loss(m, set, 0, 8, &g) == 0.0);
        for (auto b : g.blocks())
            for (double v : b) CHECK(v == 0.0);
        CHECK(gradient_check(m, set, 50).max_rel_error == 0.0);
    }
    SUBCASE("LSTM") {
        const auto set = make_windows(trajs, 8);
        const auto r = gradient_check(init_lstm<double>(LstmShape{6, 8, 30.0}, 2), set, 200);
        CHECK(r.coordinates == 200);
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("TCN") {
        TcnShape s;
        s.dilations = {1, 2};
        s.width = 5;
        s.window = 7;
        const auto set = make_windows(trajs, 7);
        const auto r = gradient_check(init_tcn<double>(s, 2), set, 200);
        CHECK(r.coordinates == 200);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("training on a constant signal reaches the fixed point") {
    Trajectory<double> c;
    c.points.assign(2000, State3<double>{1, 2, 3});
    TrainConfig tc;
    tc.window = 5;
    tc.epochs = 100;
    const auto r = train_rnn(init_lstm<double>(LstmShape{8, 5, 30.0}, 1), {c}, tc);
    CHECK(r.epoch_loss.size() == 100);
    CHECK(r.epoch_loss.back() < 1e-20);
    const auto y = lstm_predict(r.model, head(c, 0, 5));
    CHECK(std::abs(y.x - 1) < 1e-6);
    CHECK(std::abs(y.y - 2) < 1e-6);
    CHECK(std::abs(y.z - 3) < 1e-6);

    TcnShape s;
    s.dilations = {1, 2};
    s.width = 8;
    s.window = 5;
    const auto rt = train_rnn(init_tcn<double>(s, 1), {c}, tc);
    const auto yt = tcn_forward(rt.model, head(c, 0, 5));
    CHECK(std::abs(yt.x - 1) < 1e-6);
    CHECK(std::abs(yt.y - 2) < 1e-6);
    CHECK(std::abs(yt.z - 3) < 1e-6);
}

TEST_CASE("LSTM learns a sine wave") {
    Trajectory<double> s;
    for (int i = 0; i < 5000; ++i) {
        const double t = 0.02 * i;
        s.points.push_back({std::sin(t), std::cos(t), 0.5 * std::sin(2 * t)});
    }
    const auto r = train_rnn(init_lstm<double>(LstmShape{64, 35, 1.0}, 2), {s}, TrainConfig{});
    for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) CHECK(r.epoch_loss[e] < r.epoch_loss[0]);
    double mse = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i + 35 < s.size(); ++i, ++n) {
        const auto y = lstm_predict(r.model, head(s, i, 35));
        const auto& q = s.points[i + 35];
        mse += ((y.x - q.x) * (y.x - q.x) + (y.y - q.y) * (y.y - q.y) + (y.z - q.z) * (y.z - q.z)) / 3;
    }
    mse /= static_cast<double>(n);
    // brute-force run: 6.7e-6
    CHECK(mse < 1e-4);
}

TEST_CASE("training errors") {
    const std::vector<Trajectory<double>> trajs{lorenz_data(200)};
    TrainConfig tc;
    tc.window = 10;
    CHECK_THROWS_AS(train_rnn(init_lstm<double>(LstmShape{4, 8, 30.0}, 1), trajs, tc), std::invalid_argument);
    tc.precision = Precision::Single;
    CHECK_THROWS_AS(train_rnn(init_lstm<double>(LstmShape{4, 10, 30.0}, 1), trajs, tc), std::invalid_argument);

    TcnShape s;
    s.dilations = {1, 2};
    s.width = 4;
    s.window = 7;
    TrainConfig huge;
    huge.window = 7;
    huge.lr = 1e150;
    CHECK_THROWS_AS(train_rnn(init_tcn<double>(s, 1), trajs, huge), TrainingDiverged);
}

TEST_CASE("closed loop slides the window over its own output") {
    const auto data = lorenz_data(100);
    const auto m = init_lstm<double>(LstmShape{8, 35, 30.0}, 6);
    const auto pred = predict_closed_loop(m, data, 5);
    CHECK(pred.size() == 5);
    const DiscreteMap map = closed_loop_map(m);
    CHECK(map.dim == 105);
    std::vector<double> st = window_state(data, 35);
    CHECK(st.size() == 105);
    for (std::size_t k = 0; k < 5; ++k) {
        map.step(st);
        CHECK(st[102] == pred.points[k].x);
        CHECK(st[103] == pred.points[k].y);
        CHECK(st[104] == pred.points[k].z);
    }
}

TEST_CASE("save and load reproduce predictions bit for bit") {
    auto check = [&]<class T>(std::type_identity<T>) {
        const auto data = convert<T>(lorenz_data(80));
        const auto l = init_lstm<T>(LstmShape{6, 35, 30.0}, 3);
        std::stringstream sl;
        save_lstm(sl, l);
        const auto lb = load_lstm<T>(sl);
        CHECK(predict_closed_loop(lb, data, 20).points == predict_closed_loop(l, data, 20).points);

        const auto t = init_tcn<T>(TcnShape{}, 3);
        std::stringstream st;
        save_tcn(st, t);
        const auto tb = load_tcn<T>(st);
        CHECK(tb.dilations == t.dilations);
        CHECK(predict_closed_loop(tb, data, 20).points == predict_closed_loop(t, data, 20).points);
    };
    check(std::type_identity<float>{});
    check(std::type_identity<double>{});
}
