#include "crisk/preprocess.hpp"

#include <iomanip>
#include <map>
#include <ostream>
#include <set>

namespace crisk {

void VarConfig::validate() const {
    if (window < 20) throw Error(ErrorCode::InvalidConfig, "VaR window must be at least 20");
    if (!(confidence > 0.5 && confidence < 1.0)) throw Error(ErrorCode::InvalidConfig, "VaR confidence must lie in (0.5, 1)");
}

void SmoothingConfig::validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::InvalidConfig, "smoothing beta must lie in (0, 1]");
    if (seed && !std::isfinite(*seed)) throw Error(ErrorCode::InvalidConfig, "smoothing seed must be finite");
}

void BlockAverageConfig::validate() const {
    if (M < 0 || M % 2 != 0) throw Error(ErrorCode::InvalidConfig, "block average M must be even and non-negative");
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "block average offset n must be positive");
}

void PreprocessConfig::validate() const {
    var.validate();
    smoothing.validate();
    for (const auto& ba : ba_level1) ba.validate();
    for (const auto& ba : ba_level2) ba.validate();
    if (ba_level1.empty()) throw Error(ErrorCode::InvalidConfig, "at least one level-1 block average is required");
    for (int id : enabled_sets)
        if (id < 1 || id > 10) throw Error(ErrorCode::InvalidConfig, "base set ids run from 1 to 10");
    if (single_lag < 0 || max_lag < 1) throw Error(ErrorCode::InvalidConfig, "lags must be non-negative");
    if (min_rows < 1 || max_rows < min_rows) throw Error(ErrorCode::InvalidConfig, "need 1 <= min_rows <= max_rows");
}

MonthlySeries historical_var(const MonthlySeries& returns_bp, const VarConfig& cfg) {
    return MonthlySeries(returns_bp.name(), returns_bp.start() + cfg.window, historical_var(returns_bp.values(), cfg));
}

MonthlySeries ema_smooth(const MonthlySeries& s, const SmoothingConfig& cfg) {
    return MonthlySeries(s.name(), s.start(), ema_smooth(s.values(), cfg));
}

MonthlySeries double_smooth(const MonthlySeries& s, const SmoothingConfig& cfg) {
    return MonthlySeries(s.name(), s.start(), double_smooth(s.values(), cfg));
}

MonthlySeries block_average_series(const MonthlySeries& s, const BlockAverageConfig& cfg) {
    cfg.validate();
    if (!cfg.causal())
        throw Error(ErrorCode::InvalidConfig, "block average with n < M/2 would read months after t");
    const Eigen::Index first = cfg.n + cfg.M / 2;
    if (s.size() <= first) throw Error(ErrorCode::InsufficientHistory, s.name() + ": too short for block average");
    Vector<double> out(s.size() - first);
    for (Eigen::Index t = first; t < s.size(); ++t) out(t - first) = block_average(s.values(), cfg, t);
    return MonthlySeries(s.name(), s.month(first), std::move(out));
}

MonthlySeries normalize_output(const MonthlySeries& out) {
    return MonthlySeries(out.name(), out.start() + 3, normalize_output(out.values()));
}

double TrainingMatrix::to_level(Eigen::Index i, double model_output) const {
    if (recipe == OutputRecipe::Raw) return model_output;
    return denormalize_output(model_output, {trailing(i, 0), trailing(i, 1), trailing(i, 2)});
}

TrainingMatrix TrainingMatrix::rows_slice(Eigen::Index from, Eigen::Index count) const {
    TrainingMatrix out;
    out.base_set_id = base_set_id;
    out.lag = lag;
    out.recipe = recipe;
    out.input_names = input_names;
    out.inputs = inputs.middleRows(from, count);
    out.output = output.segment(from, count);
    out.months_out.assign(months_out.begin() + from, months_out.begin() + from + count);
    out.actual = actual.segment(from, count);
    out.trailing = trailing.middleRows(from, count);
    return out;
}

std::string TrainingMatrix::label() const {
    if (base_set_id == kMasterSetId) return "master";
    return "set" + std::to_string(base_set_id) + "_lag" + std::to_string(lag);
}

namespace {

std::string ba_name(const std::string& source, const BlockAverageConfig& ba) {
    return source + "_ba" + std::to_string(ba.M) + "_" + std::to_string(ba.n);
}

std::vector<std::string> moving_average_columns(const std::string& source, const PreprocessConfig& cfg) {
    std::vector<std::string> cols;
    for (const auto& ba : cfg.ba_level1) cols.push_back(ba_name(source, ba));
    const std::string first = ba_name(source, cfg.ba_level1.front());
    for (const auto& ba : cfg.ba_level2) cols.push_back(ba_name(first, ba));
    return cols;
}

const MonthlySeries& find_series(const std::vector<MonthlySeries>& raw, const std::string& name) {
    for (const auto& s : raw)
        if (s.name() == name) return s;
    throw Error(ErrorCode::MissingColumn, "input variable '" + name + "' not provided");
}

}  // namespace

std::vector<BaseSetSpec> base_set_presets(const PreprocessConfig& cfg) {
    std::vector<int> all_lags;
    for (int l = 1; l <= cfg.max_lag; ++l) all_lags.push_back(l);
    const std::vector<int> one_lag{cfg.single_lag};

    auto with = [](std::vector<std::string> head, const std::vector<std::string>& tail) {
        head.insert(head.end(), tail.begin(), tail.end());
        return head;
    };
    const auto ma_double = moving_average_columns("var_double", cfg);
    const auto ma_smooth = moving_average_columns("var_smooth", cfg);

    std::vector<BaseSetSpec> sets;
    sets.push_back({1, "raw VaR + global spread + T-bills", {"var_raw", kEmbiGlobal, kTbill}, OutputRecipe::Raw, all_lags});
    sets.push_back({2, "smoothed VaR + global spread + T-bills", {"var_smooth", kEmbiGlobal, kTbill}, OutputRecipe::Raw, all_lags});
    sets.push_back({3, "double-smoothed VaR + its moving averages", with({"var_double"}, ma_double), OutputRecipe::Raw, one_lag});
    sets.push_back({4, "smoothed VaR + its moving averages", with({"var_smooth"}, ma_smooth), OutputRecipe::Raw, one_lag});
    sets.push_back({5, "double-smoothed VaR + moving average + global spread",
                    {"var_double", ma_double.front(), kEmbiGlobal}, OutputRecipe::Raw, one_lag});
    sets.push_back({6, "smoothed VaR + moving average + global spread",
                    {"var_smooth", ma_smooth.front(), kEmbiGlobal}, OutputRecipe::Raw, one_lag});
    sets.push_back({7, "global spread + T-bills (no VaR)", {kEmbiGlobal, kTbill}, OutputRecipe::Raw, all_lags});
    sets.push_back({8, "raw VaR + global spread + T-bills, normalized output",
                    {"var_raw", kEmbiGlobal, kTbill}, OutputRecipe::Normalized, all_lags});
    sets.push_back({9, "smoothed VaR + global spread + T-bills, normalized output",
                    {"var_smooth", kEmbiGlobal, kTbill}, OutputRecipe::Normalized, all_lags});
    sets.push_back({10, "smoothed VaR + global spread + T-bills + normalized target history, normalized output",
                    {"var_smooth", kEmbiGlobal, kTbill, "embi_ve_norm"}, OutputRecipe::Normalized, all_lags});
    return sets;
}

AlignedFrame derive_features(const std::vector<MonthlySeries>& raw, const PreprocessConfig& cfg) {
    cfg.validate();
    const auto& igaem = find_series(raw, kIgaem);
    const auto& target = find_series(raw, kEmbiVe);
    const auto& global = find_series(raw, kEmbiGlobal);
    const auto& tbill = find_series(raw, kTbill);

    std::map<std::string, MonthlySeries> pool;
    auto put = [&pool](const std::string& name, const MonthlySeries& s) { pool.emplace(name, s.renamed(name)); };

    const auto var_raw = historical_var(to_basis_points(log_returns(igaem)), cfg.var);
    const auto var_smooth = ema_smooth(var_raw, cfg.smoothing);
    const auto var_double = double_smooth(var_raw, cfg.smoothing);
    put("var_raw", var_raw);
    put("var_smooth", var_smooth);
    put("var_double", var_double);
    for (const auto& [name, source] : {std::pair{std::string("var_smooth"), &var_smooth},
                                      std::pair{std::string("var_double"), &var_double}}) {
        for (const auto& ba : cfg.ba_level1) put(ba_name(name, ba), block_average_series(*source, ba));
        const auto level1 = block_average_series(*source, cfg.ba_level1.front());
        const auto first = ba_name(name, cfg.ba_level1.front());
        for (const auto& ba : cfg.ba_level2) put(ba_name(first, ba), block_average_series(level1, ba));
    }
    put(kEmbiGlobal, global);
    put(kTbill, tbill);
    put(kEmbiVe, target);
    put("embi_ve_norm", normalize_output(target));
    for (int k = 1; k <= 3; ++k) put("embi_ve_prev" + std::to_string(k), target.shifted(k));

    // Columns the enabled sets need, plus what every matrix needs for scoring.
    std::vector<std::string> needed{kEmbiVe, "embi_ve_prev1", "embi_ve_prev2", "embi_ve_prev3"};
    std::set<std::string> seen(needed.begin(), needed.end());
    const auto presets = base_set_presets(cfg);
    for (int id : cfg.enabled_sets) {
        const auto& spec = presets[static_cast<std::size_t>(id - 1)];
        std::vector<std::string> cols = spec.inputs;
        if (spec.output == OutputRecipe::Normalized) cols.push_back("embi_ve_norm");
        for (const auto& c : cols)
            if (seen.insert(c).second) needed.push_back(c);
    }
    std::vector<MonthlySeries> chosen;
    for (const auto& name : needed) chosen.push_back(pool.at(name));
    return align(chosen);
}

TrainingMatrix build_lagged_matrix(const AlignedFrame& features, const BaseSetSpec& spec, int lag,
                                   const PreprocessConfig& cfg) {
    if (lag < 0) throw Error(ErrorCode::InvalidConfig, "lag must be non-negative");
    const std::string out_name = spec.output == OutputRecipe::Raw ? kEmbiVe : "embi_ve_norm";
    const Eigen::Index out_col = features.index_of(out_name);
    const Eigen::Index actual_col = features.index_of(kEmbiVe);
    const std::array<Eigen::Index, 3> prev_cols{features.index_of("embi_ve_prev3"), features.index_of("embi_ve_prev2"),
                                                features.index_of("embi_ve_prev1")};
    std::vector<Eigen::Index> in_cols;
    for (const auto& name : spec.inputs) in_cols.push_back(features.index_of(name));

    const Eigen::Index available = std::max<Eigen::Index>(0, features.rows() - lag);
    if (available < cfg.min_rows)
        throw Error(ErrorCode::InsufficientRows, "set " + std::to_string(spec.id) + " lag " + std::to_string(lag) +
                                                     ": " + std::to_string(available) + " rows, need " +
                                                     std::to_string(cfg.min_rows));
    const Eigen::Index rows = std::min<Eigen::Index>(available, cfg.max_rows);
    const Eigen::Index first_in = available - rows;  // oldest rows are dropped

    TrainingMatrix m;
    m.base_set_id = spec.id;
    m.lag = lag;
    m.recipe = spec.output;
    m.input_names = spec.inputs;
    m.inputs.resize(rows, static_cast<Eigen::Index>(in_cols.size()));
    m.output.resize(rows);
    m.actual.resize(rows);
    m.trailing.resize(rows, 3);
    const auto& d = features.data();
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Eigen::Index r_in = first_in + i;
        const Eigen::Index r_out = r_in + lag;
        for (std::size_t c = 0; c < in_cols.size(); ++c) m.inputs(i, static_cast<Eigen::Index>(c)) = d(r_in, in_cols[c]);
        m.output(i) = d(r_out, out_col);
        m.actual(i) = d(r_out, actual_col);
        for (int k = 0; k < 3; ++k) m.trailing(i, k) = d(r_out, prev_cols[static_cast<std::size_t>(k)]);
        m.months_out.push_back(features.month(r_out));
    }
    return m;
}

std::vector<TrainingMatrix> assemble_base_sets(const std::vector<MonthlySeries>& raw, const PreprocessConfig& cfg) {
    const auto features = derive_features(raw, cfg);
    const auto presets = base_set_presets(cfg);
    std::vector<TrainingMatrix> out;
    for (const auto& spec : presets) {
        if (std::find(cfg.enabled_sets.begin(), cfg.enabled_sets.end(), spec.id) == cfg.enabled_sets.end()) continue;
        for (int lag : spec.lags) out.push_back(build_lagged_matrix(features, spec, lag, cfg));
    }
    return out;
}

std::vector<TrainingMatrix> assemble_base_sets(const AlignedFrame& frame, const PreprocessConfig& cfg) {
    for (const char* name : {kIgaem, kEmbiVe, kEmbiGlobal, kTbill}) frame.index_of(name);
    return assemble_base_sets(frame.to_series(), cfg);
}

void write_csv(std::ostream& out, const TrainingMatrix& m) {
    out << "month_in,month_out";
    for (const auto& n : m.input_names) out << ',' << n;
    out << ",output,actual\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << m.month_in(i).str() << ',' << m.months_out[static_cast<std::size_t>(i)].str();
        for (Eigen::Index j = 0; j < m.inputs.cols(); ++j) out << ',' << m.inputs(i, j);
        out << ',' << m.output(i) << ',' << m.actual(i) << '\n';
    }
}

VarBacktest var_backtest(const Vector<double>& returns_bp, int window, double beta, double confidence,
                         Eigen::Index span) {
    const Eigen::Index n = returns_bp.size();
    if (span < 1 || n - span < window)
        throw Error(ErrorCode::InsufficientHistory, "not enough returns to backtest window " + std::to_string(window));
    const Vector<double> var = historical_var(returns_bp, VarConfig{window, confidence});
    const Vector<double> band_all = ema_smooth(var, SmoothingConfig{beta, std::nullopt});
    VarBacktest bt;
    bt.band.resize(span);
    bt.falls.resize(span);
    for (Eigen::Index i = 0; i < span; ++i) {
        const Eigen::Index t = n - span + i;
        bt.band(i) = band_all(t - window);
        bt.falls(i) = -returns_bp(t);
    }
    return bt;
}

VarGridResult grid_search_var_params(const Vector<double>& returns_bp, const std::vector<int>& windows,
                                     const std::vector<double>& betas, double confidence) {
    if (windows.empty() || betas.empty()) throw Error(ErrorCode::InvalidConfig, "empty VaR parameter grid");
    const int widest = *std::max_element(windows.begin(), windows.end());
    const Eigen::Index span = returns_bp.size() - widest;
    if (span < 1)
        throw Error(ErrorCode::InsufficientHistory, std::to_string(returns_bp.size()) + " returns cannot backtest a " +
                                                        std::to_string(widest) + "-month window");
    VarGridResult g;
    g.windows = windows;
    g.betas = betas;
    g.evaluated = span;
    const auto rows = static_cast<Eigen::Index>(windows.size());
    const auto cols = static_cast<Eigen::Index>(betas.size());
    g.eam.resize(rows, cols);
    g.outliers.resize(rows, cols);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto bt = var_backtest(returns_bp, windows[static_cast<std::size_t>(i)], betas[static_cast<std::size_t>(j)],
                                         confidence, span);
            g.eam(i, j) = (bt.band - bt.falls).cwiseAbs().mean();
            g.outliers(i, j) = static_cast<int>((bt.falls.array() > bt.band.array()).count());
            if (g.eam(i, j) < best) {
                best = g.eam(i, j);
                g.best_window = windows[static_cast<std::size_t>(i)];
                g.best_beta = betas[static_cast<std::size_t>(j)];
            }
        }
    }
    return g;
}

}  // namespace crisk
