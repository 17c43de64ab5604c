#pragma once

#include "crisk/series.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace crisk {

// Names of the four raw input variables.
inline constexpr const char* kIgaem = "igaem";
inline constexpr const char* kEmbiVe = "embi_ve";
inline constexpr const char* kEmbiGlobal = "embi_global";
inline constexpr const char* kTbill = "tbill";

struct VarConfig {
    int window = 65;
    double confidence = 0.95;

    bool operator==(const VarConfig&) const = default;
    void validate() const;
    /// 1-based rank of the order statistic used as the VaR: max(1, floor((1-confidence)*window)).
    int rank() const noexcept {
        return std::max(1, static_cast<int>(std::floor((1.0 - confidence) * window + 1e-9)));
    }
};

struct SmoothingConfig {
    double beta = 0.1;
    /// Initial value of the recursion; the first observation when unset.
    std::optional<double> seed;

    bool operator==(const SmoothingConfig&) const = default;
    void validate() const;
};

/// Centered block of M+1 observations whose middle sits n months before t.
struct BlockAverageConfig {
    int M = 0;
    int n = 1;

    bool operator==(const BlockAverageConfig&) const = default;
    void validate() const;
    bool causal() const noexcept { return n >= M / 2; }
};

/// Rolling historical VaR. Element j is the loss magnitude computed from
/// returns [j, j + window), i.e. the band for the return at index j + window.
template <typename Derived>
Vector<typename Derived::Scalar> historical_var(const Eigen::MatrixBase<Derived>& returns_bp, const VarConfig& cfg) {
    using Scalar = typename Derived::Scalar;
    cfg.validate();
    const Eigen::Index n = returns_bp.size();
    const Eigen::Index w = cfg.window;
    if (n < w)
        throw Error(ErrorCode::InsufficientHistory,
                    std::to_string(n) + " returns for a " + std::to_string(w) + "-month window");
    const Eigen::Index k = cfg.rank() - 1;
    Vector<Scalar> out(n - w + 1);
    std::vector<Scalar> buf(static_cast<std::size_t>(w));
    for (Eigen::Index j = 0; j + w <= n; ++j) {
        for (Eigen::Index i = 0; i < w; ++i) buf[static_cast<std::size_t>(i)] = returns_bp(j + i);
        std::nth_element(buf.begin(), buf.begin() + k, buf.end());
        out(j) = -buf[static_cast<std::size_t>(k)];
    }
    return out;
}

/// Dated version: the band for month m only uses returns dated before m.
MonthlySeries historical_var(const MonthlySeries& returns_bp, const VarConfig& cfg);

/// Compound (exponential) moving average MA_t = beta*P_t + (1-beta)*MA_{t-1}.
template <typename Derived>
Vector<typename Derived::Scalar> ema_smooth(const Eigen::MatrixBase<Derived>& s, const SmoothingConfig& cfg) {
    using Scalar = typename Derived::Scalar;
    cfg.validate();
    if (s.size() == 0) throw Error(ErrorCode::DegenerateInput, "ema_smooth of an empty series");
    const Scalar beta = static_cast<Scalar>(cfg.beta);
    Scalar ma = cfg.seed ? static_cast<Scalar>(*cfg.seed) : s(0);
    Vector<Scalar> out(s.size());
    for (Eigen::Index t = 0; t < s.size(); ++t) {
        ma = beta * s(t) + (Scalar(1) - beta) * ma;
        out(t) = ma;
    }
    return out;
}

template <typename Derived>
Vector<typename Derived::Scalar> double_smooth(const Eigen::MatrixBase<Derived>& s, const SmoothingConfig& cfg) {
    return ema_smooth(ema_smooth(s, cfg), cfg);
}

MonthlySeries ema_smooth(const MonthlySeries& s, const SmoothingConfig& cfg);
MonthlySeries double_smooth(const MonthlySeries& s, const SmoothingConfig& cfg);

template <typename Derived>
typename Derived::Scalar block_average(const Eigen::MatrixBase<Derived>& s, const BlockAverageConfig& cfg,
                                       Eigen::Index t) {
    cfg.validate();
    const Eigen::Index half = cfg.M / 2;
    const Eigen::Index lo = t - cfg.n - half;
    const Eigen::Index hi = t - cfg.n + half;
    if (lo < 0 || hi >= s.size() || t < 0 || t >= s.size())
        throw Error(ErrorCode::IndexOutOfRange, "block average window [" + std::to_string(lo) + ", " +
                                                    std::to_string(hi) + "] outside series of length " +
                                                    std::to_string(s.size()));
    return s.segment(lo, cfg.M + 1).mean();
}

/// BA(t-n) for every month t where the window is available; requires n >= M/2
/// so that no value depends on months after t.
MonthlySeries block_average_series(const MonthlySeries& s, const BlockAverageConfig& cfg);

/// Normalized difference (OUT_t - OUT_{t-1}) / mean(OUT_{t-1}, OUT_{t-2}, OUT_{t-3}).
template <typename Derived>
Vector<typename Derived::Scalar> normalize_output(const Eigen::MatrixBase<Derived>& out) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = out.size();
    if (n < 4) throw Error(ErrorCode::InsufficientHistory, "normalize_output needs at least 4 observations");
    Vector<Scalar> mod(n - 3);
    for (Eigen::Index t = 3; t < n; ++t) {
        const Scalar mean = (out(t - 1) + out(t - 2) + out(t - 3)) / Scalar(3);
        if (mean == Scalar(0))
            throw Error(ErrorCode::ZeroTrailingMean, "zero trailing mean at index " + std::to_string(t));
        mod(t - 3) = (out(t) - out(t - 1)) / mean;
    }
    return mod;
}

/// Inverse of normalize_output. `trailing` holds OUT_{t-3}, OUT_{t-2}, OUT_{t-1} (oldest first).
template <typename Scalar>
Scalar denormalize_output(Scalar mod_value, const std::array<Scalar, 3>& trailing) {
    const Scalar mean = (trailing[2] + trailing[1] + trailing[0]) / Scalar(3);
    if (mean == Scalar(0)) throw Error(ErrorCode::ZeroTrailingMean, "zero trailing mean");
    return mod_value * mean + trailing[2];
}

MonthlySeries normalize_output(const MonthlySeries& out);

// ---------------------------------------------------------------------------
// Training matrices

enum class OutputRecipe { Raw, Normalized };

inline constexpr int kMasterSetId = 0;

struct BaseSetSpec {
    int id = 0;
    std::string description;
    std::vector<std::string> inputs;  // feature column names, in order
    OutputRecipe output = OutputRecipe::Raw;
    std::vector<int> lags;
};

/// Aligned rows of inputs and one output. Row i pairs inputs observed in
/// month months_out[i] - lag with the output of month months_out[i].
struct TrainingMatrix {
    int base_set_id = 0;
    int lag = 0;
    OutputRecipe recipe = OutputRecipe::Raw;
    std::vector<std::string> input_names;
    Matrix<double> inputs;
    Vector<double> output;
    std::vector<YearMonth> months_out;
    Vector<double> actual;    // raw target level at months_out[i]
    Matrix<double> trailing;  // raw levels at months_out[i]-3, -2, -1

    Eigen::Index rows() const noexcept { return output.size(); }
    YearMonth month_in(Eigen::Index i) const { return months_out[static_cast<std::size_t>(i)] - lag; }
    Vector<double> previous_actual() const { return trailing.col(2); }
    /// Converts a model output for row i back to target units.
    double to_level(Eigen::Index i, double model_output) const;
    /// Rows [from, from + count).
    TrainingMatrix rows_slice(Eigen::Index from, Eigen::Index count) const;
    std::string label() const;
};

struct PreprocessConfig {
    VarConfig var;
    SmoothingConfig smoothing;
    std::vector<BlockAverageConfig> ba_level1{{2, 1}, {4, 2}, {6, 3}, {10, 5}};
    std::vector<BlockAverageConfig> ba_level2{{2, 1}, {4, 2}};
    std::vector<int> enabled_sets{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int single_lag = 1;
    int max_lag = 10;
    int max_rows = 89;
    int min_rows = 30;

    bool operator==(const PreprocessConfig&) const = default;
    void validate() const;
};

/// The ten input/output configurations, in id order.
std::vector<BaseSetSpec> base_set_presets(const PreprocessConfig& cfg);

/// Every feature column the presets reference, computed on each raw series'
/// full history and then aligned on the common range.
AlignedFrame derive_features(const std::vector<MonthlySeries>& raw, const PreprocessConfig& cfg);

TrainingMatrix build_lagged_matrix(const AlignedFrame& features, const BaseSetSpec& spec, int lag,
                                   const PreprocessConfig& cfg = {});

std::vector<TrainingMatrix> assemble_base_sets(const std::vector<MonthlySeries>& raw, const PreprocessConfig& cfg = {});
std::vector<TrainingMatrix> assemble_base_sets(const AlignedFrame& frame, const PreprocessConfig& cfg = {});

void write_csv(std::ostream& out, const TrainingMatrix& m);

// ---------------------------------------------------------------------------
// VaR parameter search

struct VarGridResult {
    std::vector<int> windows;
    std::vector<double> betas;
    Matrix<double> eam;       // windows x betas
    Eigen::MatrixXi outliers;  // windows x betas
    Eigen::Index evaluated = 0;  // backtest months per cell
    int best_window = 0;
    double best_beta = 0.0;
};

/// Backtests every (window, beta) band against the realized falls over the
/// months after the largest window, so all cells share one evaluation span.
VarGridResult grid_search_var_params(const Vector<double>& returns_bp, const std::vector<int>& windows,
                                     const std::vector<double>& betas, double confidence = 0.95);

/// Band and realized fall pairs for one cell over the last `span` returns.
struct VarBacktest {
    Vector<double> band;
    Vector<double> falls;
};
VarBacktest var_backtest(const Vector<double>& returns_bp, int window, double beta, double confidence,
                         Eigen::Index span);

}  // namespace crisk
