#pragma once

// LSTM and TCN next-step forecasters trained on sliding windows with
// minibatch Adam. Forward and backward passes are written out by hand and
// run at the model's scalar type T.
//
// Both models see inputs divided by `scale` and emit outputs multiplied by
// it, so the weights work on O(1) values.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "chaosbench/analysis.hpp"
#include "chaosbench/dynamics.hpp"
#include "chaosbench/linalg.hpp"

namespace chaosbench {

/// f = σ(W_f [h; u] + b_f), i = σ(W_i [h; u] + b_i), C~ = tanh(W_c [h; u] + b_c),
/// o = σ(W_o [h; u] + b_o), C' = f C + i C~, h' = o tanh(C'), y = W_y h + b_y.
template <NetReal T>
struct LstmModel {
    std::size_t hidden = 64;
    std::size_t window = 35;
    double scale = 30.0;
    Mat<T> W_f, W_i, W_c, W_o;  // hidden x (hidden + 3)
    Vec<T> b_f, b_i, b_c, b_o;  // hidden
    Mat<T> W_y;                 // 3 x hidden
    Vec<T> b_y;                 // 3

    /// Parameter blocks in a fixed order; the optimizer and the file format
    /// both walk this list.
    std::vector<std::span<T>> blocks();
    std::vector<std::span<const T>> blocks() const;
    std::size_t parameter_count() const;
};

struct LstmShape {
    std::size_t hidden = 64;
    std::size_t window = 35;
    double scale = 30.0;
};

/// Weights and biases uniform in ±1/sqrt(fan_in), one counter stream per block.
template <NetReal T>
LstmModel<T> init_lstm(const LstmShape& shape, std::uint64_t seed);

/// One cell update on already-scaled input u.
template <NetReal T>
void lstm_cell_step(const LstmModel<T>& m, Vec<T>& h, Vec<T>& c, const State3<T>& u);

/// Unrolls the window from zero (h, c) and applies the head to the last h.
template <NetReal T>
State3<T> lstm_predict(const LstmModel<T>& m, std::span<const State3<T>> window);

/// Dilated causal convolution stack: layer l computes
///   z_n = b + sum_i h_i x_{n - d_l i}
/// with x_m = 0 for m < 0, ReLU between layers and none after the last; the
/// head reads the last layer at the final time index.
template <NetReal T>
struct TcnModel {
    std::size_t in_channels = 3;
    std::size_t kernel = 3;
    std::vector<std::size_t> dilations;
    std::vector<std::size_t> channels;  // output channels per layer
    std::size_t window = 35;
    double scale = 30.0;
    std::vector<std::vector<Mat<T>>> taps;  // taps[l][i]: channels[l] x in(l)
    std::vector<Vec<T>> bias;               // bias[l]: channels[l]
    Mat<T> W_y;                             // 3 x channels.back()
    Vec<T> b_y;

    std::size_t layers() const { return dilations.size(); }
    std::size_t layer_inputs(std::size_t l) const { return l == 0 ? in_channels : channels[l - 1]; }
    /// 1 + (k - 1) * sum(d).
    std::size_t receptive_field() const;

    std::vector<std::span<T>> blocks();
    std::vector<std::span<const T>> blocks() const;
    std::size_t parameter_count() const;
};

struct TcnShape {
    std::size_t in_channels = 3;
    std::size_t kernel = 3;
    std::vector<std::size_t> dilations{1, 2, 4, 8, 16};
    std::size_t width = 64;
    std::size_t window = 35;
    double scale = 30.0;

    void validate() const;
};

template <NetReal T>
TcnModel<T> init_tcn(const TcnShape& shape, std::uint64_t seed);

/// Last-layer activations for every time index of `input` (in_channels x L,
/// already scaled). Column n depends only on columns 0..n.
template <NetReal T>
Mat<T> tcn_stack(const TcnModel<T>& m, const Mat<T>& input);

/// Throws std::invalid_argument if the window is empty or its length differs
/// from the model's.
template <NetReal T>
State3<T> tcn_forward(const TcnModel<T>& m, std::span<const State3<T>> window);

struct TrainConfig {
    std::size_t window = 35;
    std::size_t batch = 32;
    std::size_t epochs = 10;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double lr_decay = 0.9;  // multiplies lr after every epoch
    std::uint64_t seed = 0;
    Precision precision = Precision::Double;

    void validate() const;
};

/// Every (window -> next point) pair of every trajectory, in trajectory order.
template <NetReal T>
struct WindowSet {
    std::size_t window = 0;
    std::vector<const State3<T>*> starts;  // first point of each input window
    std::vector<const State3<T>*> targets;

    std::size_t size() const { return starts.size(); }
};

/// Pointers refer into `trajs`, which must outlive the result.
template <NetReal T>
WindowSet<T> make_windows(const std::vector<Trajectory<T>>& trajs, std::size_t window);

/// Mean squared error over the batch in scaled units, and its gradient
/// written into `grad` (same block layout as the model) when non-null.
template <NetReal T>
T batch_loss(const LstmModel<T>& m, const WindowSet<T>& set, std::size_t first, std::size_t count,
             LstmModel<T>* grad);
template <NetReal T>
T batch_loss(const TcnModel<T>& m, const WindowSet<T>& set, std::size_t first, std::size_t count,
             TcnModel<T>* grad);

template <class Model>
struct TrainResult {
    Model model;
    std::vector<double> epoch_loss;
};

/// Consecutive batches in trajectory order, Adam, lr decayed per epoch.
/// Throws TrainingDiverged on a non-finite loss.
template <NetReal T>
TrainResult<LstmModel<T>> train_rnn(LstmModel<T> m, const std::vector<Trajectory<T>>& trajs, const TrainConfig& cfg);
template <NetReal T>
TrainResult<TcnModel<T>> train_rnn(TcnModel<T> m, const std::vector<Trajectory<T>>& trajs, const TrainConfig& cfg);

struct GradientCheck {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Analytic gradient of batch_loss against central differences with step h
/// on `coords` parameter coordinates drawn from `seed`. The relative error
/// of a coordinate is |a - f| / max(|a|, |f|, 1e-6).
GradientCheck gradient_check(const LstmModel<double>& m, const WindowSet<double>& set, std::size_t coords = 200,
                             std::uint64_t seed = 1, double h = 1e-6);
GradientCheck gradient_check(const TcnModel<double>& m, const WindowSet<double>& set, std::size_t coords = 200,
                             std::uint64_t seed = 1, double h = 1e-6);

/// Uses the last `window` points of `warm`, then slides the window over its
/// own outputs. Returns the n predicted points.
template <NetReal T>
Trajectory<T> predict_closed_loop(const LstmModel<T>& m, const Trajectory<T>& warm, std::size_t n);
template <NetReal T>
Trajectory<T> predict_closed_loop(const TcnModel<T>& m, const Trajectory<T>& warm, std::size_t n);

/// Closed loop as a map on the flattened window (3 * window values), with a
/// finite-difference tangent (relative step 1e-6 at double, 1e-3 at single).
template <NetReal T>
DiscreteMap closed_loop_map(const LstmModel<T>& m);
template <NetReal T>
DiscreteMap closed_loop_map(const TcnModel<T>& m);

/// Flattened last `window` points of `t`.
template <NetReal T>
std::vector<double> window_state(const Trajectory<T>& t, std::size_t window);

template <NetReal T>
void save_lstm(std::ostream& os, const LstmModel<T>& m);
template <NetReal T>
LstmModel<T> load_lstm(std::istream& is);
template <NetReal T>
void save_tcn(std::ostream& os, const TcnModel<T>& m);
template <NetReal T>
TcnModel<T> load_tcn(std::istream& is);

}  // namespace chaosbench
