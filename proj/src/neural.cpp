#include "crisk/neural.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace crisk {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Logistic: return "logistic";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "logistic") return Activation::Logistic;
    if (name == "identity") return Activation::Identity;
    throw Error(ErrorCode::ParseError, "unknown activation '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (cycles < 1) throw Error(ErrorCode::InvalidConfig, "cycles must be positive");
    if (!(stop_error > 0.0 && stop_error < 1.0)) throw Error(ErrorCode::InvalidConfig, "stop_error must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
    if (restarts < 1) throw Error(ErrorCode::InvalidConfig, "restarts must be positive");
    if (!(split >= 0.55 && split <= 0.70)) throw Error(ErrorCode::InvalidConfig, "split must lie in [0.55, 0.70]");
    if (!(init_range > 0.0)) throw Error(ErrorCode::InvalidConfig, "init_range must be positive");
    for (int h : hidden_layers)
        if (h < 1) throw Error(ErrorCode::InvalidConfig, "hidden layer sizes must be positive");
    if (min_rows < 2) throw Error(ErrorCode::InvalidConfig, "min_rows must be at least 2");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    // splitmix64 over the pair
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

NetworkModel<double> random_network(std::vector<int> layer_sizes, double range, std::uint64_t seed) {
    auto model = NetworkModel<double>::zeros(std::move(layer_sizes));
    std::mt19937_64 rng(seed);
    for (auto& w : model.weights)
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
            w.data()[i] = (2.0 * u - 1.0) * range;
        }
    return model;
}

std::pair<TrainingMatrix, TrainingMatrix> split(const TrainingMatrix& matrix, const TrainConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = matrix.rows();
    if (n < cfg.min_rows)
        throw Error(ErrorCode::TooFewRows, matrix.label() + ": " + std::to_string(n) + " rows, need " +
                                               std::to_string(cfg.min_rows));
    Eigen::Index n_train = static_cast<Eigen::Index>(std::floor(cfg.split * static_cast<double>(n) + 1e-9));
    const auto max_test = static_cast<Eigen::Index>(std::floor(0.45 * static_cast<double>(n) + 1e-9));
    n_train = std::max(n_train, n - max_test);
    return {matrix.rows_slice(0, n_train), matrix.rows_slice(n_train, n - n_train)};
}

namespace {

/// Scratch space for per-row passes so the inner loop does not allocate.
struct Workspace {
    std::vector<Vector<double>> acts;
    std::vector<Vector<double>> deltas;

    explicit Workspace(const NetworkModel<double>& m) {
        for (int s : m.layer_sizes) {
            acts.emplace_back(s);
            deltas.emplace_back(s);
        }
    }
};

double run_forward(const NetworkModel<double>& model, Workspace& ws) {
    const std::size_t last = model.weights.size() - 1;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const auto& w = model.weights[l];
        const Eigen::Index in = w.cols() - 1;
        auto& out = ws.acts[l + 1];
        out.noalias() = w.leftCols(in) * ws.acts[l];
        out += w.col(in);
        const Activation act = (l == last) ? model.output_activation : model.hidden_activation;
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = activate(act, out(i));
    }
    return ws.acts.back()(0);
}

}  // namespace

void gradient_descent_epoch(NetworkModel<double>& model, const Matrix<double>& scaled_inputs,
                            const Vector<double>& scaled_targets, double learning_rate) {
    Workspace ws(model);
    const std::size_t layers = model.weights.size();
    for (Eigen::Index r = 0; r < scaled_inputs.rows(); ++r) {
        ws.acts[0] = scaled_inputs.row(r).transpose();
        const double y = run_forward(model, ws);
        ws.deltas[layers](0) = (y - scaled_targets(r)) * activate_derivative(model.output_activation, y);
        for (std::size_t l = layers; l-- > 0;) {
            auto& w = model.weights[l];
            const Eigen::Index in = w.cols() - 1;
            const auto& delta = ws.deltas[l + 1];
            if (l > 0) {
                ws.deltas[l].noalias() = w.leftCols(in).transpose() * delta;
                for (Eigen::Index i = 0; i < ws.deltas[l].size(); ++i)
                    ws.deltas[l](i) *= activate_derivative(model.hidden_activation, ws.acts[l](i));
            }
            w.leftCols(in).noalias() -= learning_rate * delta * ws.acts[l].transpose();
            w.col(in) -= learning_rate * delta;
        }
    }
}

double mean_loss(const NetworkModel<double>& model, const Matrix<double>& scaled_inputs,
                 const Vector<double>& scaled_targets) {
    Workspace ws(model);
    double total = 0.0;
    for (Eigen::Index r = 0; r < scaled_inputs.rows(); ++r) {
        ws.acts[0] = scaled_inputs.row(r).transpose();
        const double d = run_forward(model, ws) - scaled_targets(r);
        total += 0.5 * d * d;
    }
    return total / static_cast<double>(scaled_inputs.rows());
}

namespace {

/// Training MAE in target units divided by the target range.
double normalized_error(const NetworkModel<double>& model, const Matrix<double>& scaled_inputs,
                        const Vector<double>& outputs, double range) {
    Workspace ws(model);
    double total = 0.0;
    for (Eigen::Index r = 0; r < scaled_inputs.rows(); ++r) {
        ws.acts[0] = scaled_inputs.row(r).transpose();
        total += std::abs(model.output_scaling.invert(0, run_forward(model, ws)) - outputs(r));
    }
    return total / static_cast<double>(scaled_inputs.rows()) / range;
}

}  // namespace

TrainResult train(const Matrix<double>& inputs, const Vector<double>& outputs, const TrainConfig& cfg) {
    cfg.validate();
    if (inputs.rows() != outputs.size() || inputs.rows() < 2)
        throw Error(ErrorCode::DimensionMismatch, "training inputs and outputs must have the same, non-trivial length");
    const double lo = outputs.minCoeff();
    const double hi = outputs.maxCoeff();
    if (!(hi > lo)) throw Error(ErrorCode::ConstantOutput, "training output column is constant");

    std::vector<int> sizes{static_cast<int>(inputs.cols())};
    if (cfg.hidden_layers.empty()) {
        sizes.push_back(static_cast<int>(inputs.cols()));
    } else {
        sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    }
    sizes.push_back(1);

    TrainResult result;
    auto& model = result.model;
    model = random_network(sizes, cfg.init_range, cfg.rng_seed);
    model.input_scaling = AffineMap<double>::fit_minmax(inputs);
    model.output_scaling = AffineMap<double>::fit_minmax(outputs);

    Matrix<double> x(inputs.rows(), inputs.cols());
    for (Eigen::Index j = 0; j < inputs.cols(); ++j)
        for (Eigen::Index i = 0; i < inputs.rows(); ++i) x(i, j) = model.input_scaling.apply(j, inputs(i, j));
    Vector<double> t(outputs.size());
    for (Eigen::Index i = 0; i < outputs.size(); ++i) t(i) = model.output_scaling.apply(0, outputs(i));

    double loss = mean_loss(model, x, t);
    if (!std::isfinite(loss)) throw Error(ErrorCode::DivergedTraining, "initial loss is not finite");
    double rate = cfg.learning_rate;
    for (int epoch = 1; epoch <= cfg.cycles; ++epoch) {
        auto saved = model.weights;
        gradient_descent_epoch(model, x, t, rate);
        const double next = mean_loss(model, x, t);
        if (!std::isfinite(next)) throw Error(ErrorCode::DivergedTraining, "loss became non-finite");
        if (next > loss) {
            // reject the pass: keep the previous weights and try a smaller step next epoch
            model.weights = std::move(saved);
            rate *= 0.5;
        } else {
            loss = next;
            rate = cfg.learning_rate;
        }
        result.loss_history.push_back(loss);
        result.epochs = epoch;
        result.final_error = normalized_error(model, x, outputs, hi - lo);
        if (result.final_error < cfg.stop_error) break;
    }
    return result;
}

TrainResult train(const TrainingMatrix& train_data, const TrainConfig& cfg) {
    return train(train_data.inputs, train_data.output, cfg);
}

Vector<double> predict_levels(const NetworkModel<double>& model, const TrainingMatrix& m) {
    Vector<double> out(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = m.to_level(i, forward(model, m.inputs.row(i).transpose()));
    return out;
}

ForecastScore default_scorer(const Vector<double>& predicted, const TrainingMatrix& test) {
    return score_forecasts(predicted, test.actual, test.trailing(0, 2));
}

std::vector<RestartOutcome> multi_restart_train(const TrainingMatrix& matrix, const TrainConfig& cfg,
                                                const Scorer& scorer) {
    const auto [train_part, test_part] = split(matrix, cfg);
    const auto n = static_cast<std::size_t>(cfg.restarts);
    std::vector<std::optional<RestartOutcome>> slots(n);
    std::vector<std::optional<Error>> failures(n);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t r = next++; r < n; r = next++) {
            TrainConfig local = cfg;
            local.rng_seed = derive_seed(cfg.rng_seed, r);
            try {
                auto fit = train(train_part, local);
                RestartOutcome out;
                out.restart = static_cast<int>(r);
                out.seed = local.rng_seed;
                out.epochs = fit.epochs;
                out.test_predictions = predict_levels(fit.model, test_part);
                out.score = scorer(out.test_predictions, test_part);
                out.model = std::move(fit.model);
                slots[r] = std::move(out);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DivergedTraining) failures[r] = e;
            }
        }
    };
    unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    for (const auto& f : failures)
        if (f) throw Error(f->code(), matrix.label() + ": " + f->what());

    std::vector<RestartOutcome> ranked;
    for (auto& s : slots)
        if (s) ranked.push_back(std::move(*s));
    if (ranked.empty()) throw Error(ErrorCode::AllDiverged, matrix.label() + ": every restart diverged");
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RestartOutcome& a, const RestartOutcome& b) { return a.score.ism > b.score.ism; });
    return ranked;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kModelMagic = "crisk-network";
constexpr int kModelVersion = 1;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string expect_word(std::istream& in, std::string_view word) {
    std::string got;
    if (!(in >> got) || got != word)
        throw Error(ErrorCode::ParseError, "model file: expected '" + std::string(word) + "', got '" + got + "'");
    return got;
}

double read_double(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw Error(ErrorCode::ParseError, "model file truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw Error(ErrorCode::ParseError, "model file: bad number '" + tok + "'");
    return v;
}

}  // namespace

void write_model(std::ostream& out, const NetworkModel<double>& model) {
    model.validate();
    out << kModelMagic << ' ' << kModelVersion << '\n';
    out << "layers " << model.layer_sizes.size();
    for (int s : model.layer_sizes) out << ' ' << s;
    out << "\nhidden_activation " << to_string(model.hidden_activation) << '\n';
    out << "output_activation " << to_string(model.output_activation) << '\n';
    out << "input_scale";
    for (Eigen::Index j = 0; j < model.input_scaling.size(); ++j) out << ' ' << fmt(model.input_scaling.scale(j));
    out << "\ninput_offset";
    for (Eigen::Index j = 0; j < model.input_scaling.size(); ++j) out << ' ' << fmt(model.input_scaling.offset(j));
    out << "\noutput_scale " << fmt(model.output_scaling.scale(0)) << '\n';
    out << "output_offset " << fmt(model.output_scaling.offset(0)) << '\n';
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const auto& w = model.weights[l];
        out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) out << (j ? " " : "") << fmt(w(i, j));
            out << '\n';
        }
    }
    out << "end\n";
}

NetworkModel<double> read_model(std::istream& in) {
    expect_word(in, kModelMagic);
    int version = 0;
    if (!(in >> version) || version != kModelVersion)
        throw Error(ErrorCode::ParseError, "unsupported model format version " + std::to_string(version));
    NetworkModel<double> m;
    expect_word(in, "layers");
    std::size_t count = 0;
    in >> count;
    if (!in || count < 2 || count > 64) throw Error(ErrorCode::ParseError, "model file: bad layer count");
    m.layer_sizes.resize(count);
    for (auto& s : m.layer_sizes)
        if (!(in >> s) || s < 1) throw Error(ErrorCode::ParseError, "model file: bad layer size");
    std::string name;
    expect_word(in, "hidden_activation");
    in >> name;
    m.hidden_activation = parse_activation(name);
    expect_word(in, "output_activation");
    in >> name;
    m.output_activation = parse_activation(name);
    const int n_in = m.layer_sizes.front();
    m.input_scaling = AffineMap<double>::identity(n_in);
    expect_word(in, "input_scale");
    for (int j = 0; j < n_in; ++j) m.input_scaling.scale(j) = read_double(in);
    expect_word(in, "input_offset");
    for (int j = 0; j < n_in; ++j) m.input_scaling.offset(j) = read_double(in);
    m.output_scaling = AffineMap<double>::identity(1);
    expect_word(in, "output_scale");
    m.output_scaling.scale(0) = read_double(in);
    expect_word(in, "output_offset");
    m.output_scaling.offset(0) = read_double(in);
    for (std::size_t l = 0; l + 1 < count; ++l) {
        expect_word(in, "weights");
        std::size_t idx = 0;
        Eigen::Index rows = 0, cols = 0;
        in >> idx >> rows >> cols;
        if (!in || idx != l || rows != m.layer_sizes[l + 1] || cols != m.layer_sizes[l] + 1)
            throw Error(ErrorCode::ParseError, "model file: weight block " + std::to_string(l) + " has the wrong shape");
        Matrix<double> w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = read_double(in);
        m.weights.push_back(std::move(w));
    }
    expect_word(in, "end");
    m.validate();
    return m;
}

}  // namespace crisk
