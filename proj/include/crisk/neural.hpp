#pragma once

#include "crisk/metrics.hpp"
#include "crisk/preprocess.hpp"
#include "crisk/series.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace crisk {

enum class Activation { Tanh, Logistic, Identity };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

template <typename Scalar>
Scalar activate(Activation a, Scalar z) noexcept {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Logistic: return Scalar(1) / (Scalar(1) + std::exp(-z));
        case Activation::Identity: break;
    }
    return z;
}

/// Derivative expressed through the activation's output value.
template <typename Scalar>
Scalar activate_derivative(Activation a, Scalar out) noexcept {
    switch (a) {
        case Activation::Tanh: return Scalar(1) - out * out;
        case Activation::Logistic: return out * (Scalar(1) - out);
        case Activation::Identity: break;
    }
    return Scalar(1);
}

/// Per-column x -> x * scale + offset.
template <typename Scalar>
struct AffineMap {
    Vector<Scalar> scale;
    Vector<Scalar> offset;

    static AffineMap identity(Eigen::Index n) { return {Vector<Scalar>::Ones(n), Vector<Scalar>::Zero(n)}; }

    /// Maps each column's [min, max] onto [-1, 1]; a constant column is only centered.
    template <typename Derived>
    static AffineMap fit_minmax(const Eigen::MatrixBase<Derived>& data) {
        AffineMap m{Vector<Scalar>(data.cols()), Vector<Scalar>(data.cols())};
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            const Scalar lo = data.col(j).minCoeff();
            const Scalar hi = data.col(j).maxCoeff();
            if (hi > lo) {
                m.scale(j) = Scalar(2) / (hi - lo);
                m.offset(j) = Scalar(-1) - lo * m.scale(j);
            } else {
                m.scale(j) = Scalar(1);
                m.offset(j) = -lo;
            }
        }
        return m;
    }

    Eigen::Index size() const noexcept { return scale.size(); }
    bool invertible() const noexcept {
        for (Eigen::Index i = 0; i < scale.size(); ++i)
            if (!(scale(i) != Scalar(0) && std::isfinite(scale(i)) && std::isfinite(offset(i)))) return false;
        return true;
    }
    Scalar apply(Eigen::Index j, Scalar x) const noexcept { return x * scale(j) + offset(j); }
    Scalar invert(Eigen::Index j, Scalar y) const noexcept { return (y - offset(j)) / scale(j); }
};

/// An input row after the model's input scaling. Only `scale_inputs` makes
/// one, and `scale_inputs` only accepts raw Eigen rows, so a row cannot be
/// scaled twice.
template <typename Scalar>
class ScaledRow {
public:
    const Vector<Scalar>& values() const noexcept { return values_; }

    static ScaledRow trusted(Vector<Scalar> v) { return ScaledRow(std::move(v)); }

private:
    explicit ScaledRow(Vector<Scalar> v) : values_(std::move(v)) {}
    Vector<Scalar> values_;
};

/// Fully connected feed-forward network. weights[l] maps layer l to l+1 and
/// has layer_sizes[l] + 1 columns, the last one being the bias.
template <typename Scalar>
struct NetworkModel {
    std::vector<int> layer_sizes;
    std::vector<Matrix<Scalar>> weights;
    Activation hidden_activation = Activation::Tanh;
    Activation output_activation = Activation::Identity;
    AffineMap<Scalar> input_scaling;
    AffineMap<Scalar> output_scaling;

    int input_count() const noexcept { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    Eigen::Index parameter_count() const noexcept {
        Eigen::Index n = 0;
        for (const auto& w : weights) n += w.size();
        return n;
    }

    /// Zero weights and identity scaling for the given layer sizes.
    static NetworkModel zeros(std::vector<int> sizes) {
        NetworkModel m;
        m.layer_sizes = std::move(sizes);
        for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l)
            m.weights.push_back(Matrix<Scalar>::Zero(m.layer_sizes[l + 1], m.layer_sizes[l] + 1));
        m.input_scaling = AffineMap<Scalar>::identity(m.layer_sizes.front());
        m.output_scaling = AffineMap<Scalar>::identity(1);
        return m;
    }

    void validate() const {
        if (layer_sizes.size() < 2 || layer_sizes.back() != 1)
            throw Error(ErrorCode::DimensionMismatch, "network needs an input layer and a single output");
        if (weights.size() + 1 != layer_sizes.size())
            throw Error(ErrorCode::DimensionMismatch, "weight matrices do not match layer count");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (layer_sizes[l] < 1 || weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] + 1)
                throw Error(ErrorCode::DimensionMismatch, "weight matrix " + std::to_string(l) + " has the wrong shape");
            if (!weights[l].allFinite()) throw Error(ErrorCode::DivergedTraining, "non-finite weight");
        }
        if (input_scaling.size() != layer_sizes.front() || output_scaling.size() != 1 || !input_scaling.invertible() ||
            !output_scaling.invertible())
            throw Error(ErrorCode::DimensionMismatch, "scaling maps are missing or not invertible");
    }
};

template <typename Scalar, typename Derived>
ScaledRow<Scalar> scale_inputs(const NetworkModel<Scalar>& model, const Eigen::MatrixBase<Derived>& raw) {
    if (raw.size() != model.input_count())
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(raw.size()) + " values, model expects " +
                                                      std::to_string(model.input_count()));
    Vector<Scalar> v(raw.size());
    for (Eigen::Index j = 0; j < raw.size(); ++j) v(j) = model.input_scaling.apply(j, raw(j));
    return ScaledRow<Scalar>::trusted(std::move(v));
}

/// Layer-by-layer evaluation in scaled units; activations[l] is the output of layer l.
template <typename Scalar>
void forward_layers(const NetworkModel<Scalar>& model, const Vector<Scalar>& x, std::vector<Vector<Scalar>>& activations) {
    activations.resize(model.layer_sizes.size());
    activations[0] = x;
    const std::size_t last = model.weights.size() - 1;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const auto& w = model.weights[l];
        const Eigen::Index in = w.cols() - 1;
        auto& out = activations[l + 1];
        out.noalias() = w.leftCols(in) * activations[l];
        out += w.col(in);
        const Activation act = (l == last) ? model.output_activation : model.hidden_activation;
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = activate(act, out(i));
    }
}

/// Network output in scaled units.
template <typename Scalar>
Scalar forward_scaled(const NetworkModel<Scalar>& model, const ScaledRow<Scalar>& x) {
    std::vector<Vector<Scalar>> acts;
    forward_layers(model, x.values(), acts);
    return acts.back()(0);
}

template <typename Scalar, typename Derived>
Scalar forward(const NetworkModel<Scalar>& model, const Eigen::MatrixBase<Derived>& input) {
    return model.output_scaling.invert(0, forward_scaled(model, scale_inputs(model, input)));
}

/// Gradient of 0.5 * (output - target)^2 (scaled units) with respect to every weight.
template <typename Scalar>
std::vector<Matrix<Scalar>> loss_gradient(const NetworkModel<Scalar>& model, const Vector<Scalar>& x, Scalar target) {
    std::vector<Vector<Scalar>> acts;
    forward_layers(model, x, acts);
    std::vector<Matrix<Scalar>> grads(model.weights.size());
    Vector<Scalar> delta(1);
    delta(0) = (acts.back()(0) - target) * activate_derivative(model.output_activation, acts.back()(0));
    for (std::size_t l = model.weights.size(); l-- > 0;) {
        const auto& w = model.weights[l];
        const Eigen::Index in = w.cols() - 1;
        grads[l].resize(w.rows(), w.cols());
        grads[l].leftCols(in).noalias() = delta * acts[l].transpose();
        grads[l].col(in) = delta;
        if (l > 0) {
            Vector<Scalar> back = w.leftCols(in).transpose() * delta;
            for (Eigen::Index i = 0; i < back.size(); ++i)
                back(i) *= activate_derivative(model.hidden_activation, acts[l](i));
            delta = std::move(back);
        }
    }
    return grads;
}

/// Largest relative gap between analytic and central-difference gradients.
template <typename Scalar>
Scalar gradient_check(const NetworkModel<Scalar>& model, const ScaledRow<Scalar>& sample, Scalar target, Scalar epsilon) {
    if (!(epsilon >= Scalar(1e-7) && epsilon <= Scalar(1e-3)))
        throw Error(ErrorCode::InvalidConfig, "gradient check epsilon must lie in [1e-7, 1e-3]");
    const auto analytic = loss_gradient(model, sample.values(), target);
    auto loss = [&](const NetworkModel<Scalar>& m) {
        const Scalar d = forward_scaled(m, sample) - target;
        return Scalar(0.5) * d * d;
    };
    NetworkModel<Scalar> probe = model;
    Scalar worst = 0;
    for (std::size_t l = 0; l < probe.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < probe.weights[l].size(); ++i) {
            Scalar& w = probe.weights[l].data()[i];
            const Scalar saved = w;
            w = saved + epsilon;
            const Scalar up = loss(probe);
            w = saved - epsilon;
            const Scalar down = loss(probe);
            w = saved;
            const Scalar numeric = (up - down) / (Scalar(2) * epsilon);
            const Scalar a = analytic[l].data()[i];
            const Scalar denom = std::max(std::abs(a), std::abs(numeric));
            const Scalar gap = denom > Scalar(1e-10) ? std::abs(a - numeric) / denom : std::abs(a - numeric);
            worst = std::max(worst, gap);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int cycles = 1000;
    double stop_error = 0.10;
    double learning_rate = 0.10;
    int restarts = 5000;
    std::uint64_t rng_seed = 20050601;
    double split = 0.60;
    std::vector<int> hidden_layers;  // empty: one hidden layer as wide as the input
    double init_range = 0.5;
    int min_rows = 20;
    int threads = 0;  // 0: hardware concurrency

    bool operator==(const TrainConfig&) const = default;
    void validate() const;
};

struct TrainResult {
    NetworkModel<double> model;
    int epochs = 0;
    std::vector<double> loss_history;  // accepted mean loss after each epoch
    double final_error = 0.0;          // training MAE / output range
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Uniform weights in [-range, range] drawn from a seeded stream.
NetworkModel<double> random_network(std::vector<int> layer_sizes, double range, std::uint64_t seed);

/// Chronological split; the earliest `cfg.split` share trains, the test share never exceeds 45 %.
std::pair<TrainingMatrix, TrainingMatrix> split(const TrainingMatrix& matrix, const TrainConfig& cfg);

/// One pass of per-row gradient descent over the data, in scaled units.
void gradient_descent_epoch(NetworkModel<double>& model, const Matrix<double>& scaled_inputs,
                            const Vector<double>& scaled_targets, double learning_rate);

/// Mean 0.5*(output - target)^2 over the rows, in scaled units.
double mean_loss(const NetworkModel<double>& model, const Matrix<double>& scaled_inputs,
                 const Vector<double>& scaled_targets);

TrainResult train(const Matrix<double>& inputs, const Vector<double>& outputs, const TrainConfig& cfg);
TrainResult train(const TrainingMatrix& train_data, const TrainConfig& cfg);

/// Level forecasts of `model` for every row of `m` (denormalized when needed).
Vector<double> predict_levels(const NetworkModel<double>& model, const TrainingMatrix& m);

struct RestartOutcome {
    int restart = 0;
    std::uint64_t seed = 0;
    NetworkModel<double> model;
    int epochs = 0;
    Vector<double> test_predictions;  // target units
    ForecastScore score;
};

using Scorer = std::function<ForecastScore(const Vector<double>& predicted, const TrainingMatrix& test)>;

/// Out-of-sample ISM (with EP) of level forecasts on a test slice.
ForecastScore default_scorer(const Vector<double>& predicted, const TrainingMatrix& test);

/// Trains cfg.restarts networks from distinct seeds and ranks them by
/// descending test ISM (perfect strategies first, ties by restart index).
std::vector<RestartOutcome> multi_restart_train(const TrainingMatrix& matrix, const TrainConfig& cfg,
                                                const Scorer& scorer = default_scorer);

void write_model(std::ostream& out, const NetworkModel<double>& model);
NetworkModel<double> read_model(std::istream& in);

}  // namespace crisk
