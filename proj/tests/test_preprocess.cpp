#include "crisk/preprocess.hpp"
#include "crisk/synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace crisk;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::ParseError;
}

Vector<double> vec(std::initializer_list<double> v) {
    Vector<double> out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

// Sort the window, take the k-th smallest, flip the sign.
double var_oracle(const Vector<double>& r, Eigen::Index from, int window, int k) {
    std::vector<double> w(r.data() + from, r.data() + from + window);
    std::sort(w.begin(), w.end());
    return -w[static_cast<std::size_t>(k - 1)];
}

// Closed form of the recursion: (1-b)^(t+1) seed + sum_j b (1-b)^(t-j) x_j.
double ema_oracle(const Vector<double>& x, double beta, double seed, Eigen::Index t) {
    double v = std::pow(1.0 - beta, static_cast<double>(t + 1)) * seed;
    for (Eigen::Index j = 0; j <= t; ++j) v += beta * std::pow(1.0 - beta, static_cast<double>(t - j)) * x(j);
    return v;
}

}  // namespace

TEST_CASE("VaR rank") {
    CHECK(VarConfig{65, 0.95}.rank() == 3);
    CHECK(VarConfig{50, 0.95}.rank() == 2);
    CHECK(VarConfig{20, 0.99}.rank() == 1);
    CHECK(VarConfig{80, 0.90}.rank() == 8);
}

TEST_CASE("historical_var picks the third-lowest return of 65") {
    Vector<double> r = Vector<double>::LinSpaced(65, 1, 65);
    r(10) = -300;
    r(40) = -150;
    r(20) = -200;
    const auto v = historical_var(r, VarConfig{65, 0.95});
    REQUIRE(v.size() == 1);
    CHECK(v(0) == 150.0);

    r(40) = -100;
    r(50) = -250;
    CHECK(historical_var(r, VarConfig{65, 0.95})(0) == 200.0);

    CHECK(historical_var(Vector<double>::Constant(65, 10.0), VarConfig{65, 0.95})(0) == -10.0);
    CHECK(code_of([] { historical_var(Vector<double>::Zero(64), VarConfig{65, 0.95}); }) ==
          ErrorCode::InsufficientHistory);
}

TEST_CASE("historical_var matches a sort-and-pick oracle") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z(0.0, 80.0);
    for (int window : {50, 65, 80}) {
        Vector<double> r(300);
        for (auto& x : r) x = std::round(z(rng));  // ties included
        const VarConfig cfg{window, 0.95};
        const auto v = historical_var(r, cfg);
        REQUIRE(v.size() == 300 - window + 1);
        for (Eigen::Index j = 0; j < v.size(); ++j) CHECK(v(j) == var_oracle(r, j, window, cfg.rank()));
    }
}

TEST_CASE("dated VaR only uses earlier returns") {
    Vector<double> r = Vector<double>::LinSpaced(70, -35, 34);
    const MonthlySeries returns("r", YearMonth(2000, 2), r);
    const auto v = historical_var(returns, VarConfig{65, 0.95});
    CHECK(v.start() == YearMonth(2000, 2) + 65);
    // the band for the month after the window covers returns [0, 65)
    CHECK(*v.at(YearMonth(2000, 2) + 65) == var_oracle(r, 0, 65, 3));
}

TEST_CASE("ema_smooth") {
    SmoothingConfig zero{0.1, 0.0};
    const auto two = ema_smooth(vec({100, 100}), zero);
    CHECK(two(0) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(two(1) == doctest::Approx(19.0).epsilon(1e-15));
    const auto twice = double_smooth(vec({100, 100}), zero);
    CHECK(twice(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(twice(1) == doctest::Approx(2.8).epsilon(1e-15));

    const auto x = vec({3, -1, 4, 1, -5, 9, 2, 6});
    CHECK(ema_smooth(x, SmoothingConfig{1.0, std::nullopt}) == x);
    CHECK(double_smooth(x, SmoothingConfig{1.0, 123.0}) == x);
    const auto c = ema_smooth(Vector<double>::Constant(20, 7.5), SmoothingConfig{0.1, 7.5});
    CHECK((c.array() == 7.5).all());
    // unset seed means the first observation
    CHECK(ema_smooth(x, SmoothingConfig{0.3, std::nullopt}) == ema_smooth(x, SmoothingConfig{0.3, 3.0}));
}

TEST_CASE("ema_smooth matches its closed form and stays in the data range") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100.0, 300.0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector<double> x(40);
        for (auto& v : x) v = u(rng);
        const double beta = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
        const double seed = u(rng);
        const auto m = ema_smooth(x, SmoothingConfig{beta, seed});
        double lo = seed, hi = seed;
        for (Eigen::Index t = 0; t < x.size(); ++t) {
            lo = std::min(lo, x(t));
            hi = std::max(hi, x(t));
            CHECK(m(t) == doctest::Approx(ema_oracle(x, beta, seed, t)).epsilon(1e-10));
            CHECK(m(t) >= lo - 1e-9);
            CHECK(m(t) <= hi + 1e-9);
        }
    }
}

TEST_CASE("block_average") {
    const auto s = vec({1, 2, 3, 4, 5});
    CHECK(block_average(s, BlockAverageConfig{2, 2}, 4) == 3.0);
    CHECK(block_average(s, BlockAverageConfig{0, 1}, 4) == 4.0);
    CHECK(block_average(Vector<double>::Constant(30, 4.25), BlockAverageConfig{10, 5}, 29) == 4.25);
    CHECK(code_of([&] { block_average(s, BlockAverageConfig{4, 1}, 2); }) == ErrorCode::IndexOutOfRange);
    CHECK(code_of([&] { block_average(s, BlockAverageConfig{3, 2}, 4); }) == ErrorCode::InvalidConfig);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    Vector<double> x(60);
    for (auto& v : x) v = z(rng);
    const Vector<double> shifted = (x.array() + 12.5).matrix();
    for (const BlockAverageConfig cfg : {BlockAverageConfig{2, 1}, BlockAverageConfig{4, 2}, BlockAverageConfig{10, 5}}) {
        for (Eigen::Index t = cfg.n + cfg.M / 2; t < x.size(); ++t) {
            double sum = 0;
            for (int k = -cfg.M / 2; k <= cfg.M / 2; ++k) sum += x(t - cfg.n + k);
            CHECK(block_average(x, cfg, t) == doctest::Approx(sum / (cfg.M + 1)).epsilon(1e-12));
            CHECK(block_average(shifted, cfg, t) == doctest::Approx(block_average(x, cfg, t) + 12.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("block_average_series refuses windows that reach past t") {
    const MonthlySeries s("s", YearMonth(2000, 1), Vector<double>::LinSpaced(24, 1, 24));
    CHECK(code_of([&] { block_average_series(s, BlockAverageConfig{4, 1}); }) == ErrorCode::InvalidConfig);
    const auto ba = block_average_series(s, BlockAverageConfig{4, 2});
    CHECK(ba.start() == YearMonth(2000, 5));
    CHECK(*ba.at(YearMonth(2000, 5)) == doctest::Approx(3.0));  // mean of months 1..5
}

TEST_CASE("normalize_output and its inverse") {
    const auto mod = normalize_output(vec({100, 100, 100, 110}));
    REQUIRE(mod.size() == 1);
    CHECK(mod(0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK((normalize_output(Vector<double>::Constant(10, 3.0)).array() == 0.0).all());
    CHECK(code_of([] { normalize_output(vec({0, 0, 0, 5})); }) == ErrorCode::ZeroTrailingMean);
    CHECK(denormalize_output(0.1, std::array<double, 3>{100, 100, 100}) == doctest::Approx(110.0));
    CHECK(denormalize_output(0.0, std::array<double, 3>{90, 95, 101}) == 101.0);
    CHECK(code_of([] { denormalize_output(0.3, std::array<double, 3>{1, -1, 0}); }) == ErrorCode::ZeroTrailingMean);

    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(200.0, 2000.0);
    Vector<double> x(30);
    for (auto& v : x) v = u(rng);
    const auto m = normalize_output(x);
    for (Eigen::Index t = 3; t < x.size(); ++t)
        CHECK(std::abs(denormalize_output(m(t - 3), std::array<double, 3>{x(t - 3), x(t - 2), x(t - 1)}) - x(t)) <=
              1e-12 * x(t));
}

TEST_CASE("base set presets") {
    const PreprocessConfig cfg;
    const auto sets = base_set_presets(cfg);
    REQUIRE(sets.size() == 10);
    int total = 0;
    for (const auto& s : sets) total += static_cast<int>(s.lags.size());
    CHECK(total == 64);
    for (int id : {3, 4, 5, 6}) CHECK(sets[static_cast<std::size_t>(id - 1)].lags == std::vector<int>{1});
    for (const auto& name : sets[6].inputs) CHECK(name.find("var") == std::string::npos);
    for (int id = 1; id <= 10; ++id)
        CHECK((sets[static_cast<std::size_t>(id - 1)].output == OutputRecipe::Normalized) == (id >= 8));
}

TEST_CASE("lagged matrices pair input month m with output month m+lag") {
    const auto raw = make_synthetic_dataset();
    PreprocessConfig cfg;
    const auto features = derive_features(raw, cfg);
    const auto matrices = assemble_base_sets(raw, cfg);
    REQUIRE(matrices.size() == 64);
    std::set<std::pair<int, int>> seen;
    for (const auto& m : matrices) {
        CHECK(seen.insert({m.base_set_id, m.lag}).second);
        CHECK(m.rows() == 89);
        CHECK(m.months_out.back() == features.last());
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const YearMonth out = m.months_out[static_cast<std::size_t>(i)];
            CHECK(m.month_in(i) + m.lag == out);
            const Eigen::Index r_in = m.month_in(i) - features.start();
            for (std::size_t c = 0; c < m.input_names.size(); ++c)
                CHECK(m.inputs(i, static_cast<Eigen::Index>(c)) == features.column(m.input_names[c])(r_in));
            CHECK(m.actual(i) == *raw[1].at(out));
            CHECK(m.trailing(i, 2) == *raw[1].at(out - 1));
            CHECK(m.trailing(i, 0) == *raw[1].at(out - 3));
            if (m.recipe == OutputRecipe::Raw) CHECK(m.output(i) == m.actual(i));
            CHECK(m.to_level(i, m.output(i)) == doctest::Approx(m.actual(i)).epsilon(1e-12));
        }
    }
}

TEST_CASE("a lag of nine pairs February inputs with November outputs") {
    const auto raw = make_synthetic_dataset();
    const PreprocessConfig cfg;
    const auto features = derive_features(raw, cfg);
    const auto m = build_lagged_matrix(features, base_set_presets(cfg)[0], 9, cfg);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (m.month_in(i).month() == 2) CHECK(m.months_out[static_cast<std::size_t>(i)].month() == 11);
    const auto same = build_lagged_matrix(features, base_set_presets(cfg)[0], 0, cfg);
    CHECK(same.month_in(0) == same.months_out[0]);
}

TEST_CASE("row cap and minimum") {
    const auto raw = make_synthetic_dataset();
    PreprocessConfig cfg;
    const auto features = derive_features(raw, cfg);
    const auto spec = base_set_presets(cfg)[6];
    const AlignedFrame short_frame(features.start(), features.names(), features.data().topRows(25));
    cfg.min_rows = 15;
    CHECK(build_lagged_matrix(short_frame, spec, 10, cfg).rows() == 15);
    cfg.min_rows = 30;
    CHECK(code_of([&] { build_lagged_matrix(short_frame, spec, 10, cfg); }) == ErrorCode::InsufficientRows);

    auto missing = raw;
    missing.erase(missing.begin() + 2);
    CHECK(code_of([&] { assemble_base_sets(missing, cfg); }) == ErrorCode::MissingColumn);
}

TEST_CASE("VaR grid search agrees with an exhaustive recomputation") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> z(0.0, 100.0);
    Vector<double> r(200);
    for (auto& x : r) x = z(rng);
    const std::vector<int> windows{50, 55, 60, 65, 70, 75, 80};
    const std::vector<double> betas{0.1, 0.3, 0.5, 1.0};
    const auto g = grid_search_var_params(r, windows, betas, 0.95);
    const Eigen::Index span = 200 - 80;
    CHECK(g.evaluated == span);

    double best = 1e300;
    int best_w = 0;
    double best_b = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const int w = windows[i];
        const int k = VarConfig{w, 0.95}.rank();
        for (std::size_t j = 0; j < betas.size(); ++j) {
            // band for return t: EMA (seeded with the first band) of sort-and-pick VaRs
            double ema = var_oracle(r, 0, w, k);
            std::vector<double> band(200, 0.0);
            for (Eigen::Index t = w; t < 200; ++t) {
                ema = betas[j] * var_oracle(r, t - w, w, k) + (1 - betas[j]) * ema;
                band[static_cast<std::size_t>(t)] = ema;
            }
            double err = 0;
            int outliers = 0;
            for (Eigen::Index t = 200 - span; t < 200; ++t) {
                err += std::abs(band[static_cast<std::size_t>(t)] + r(t));
                if (-r(t) > band[static_cast<std::size_t>(t)]) ++outliers;
            }
            err /= static_cast<double>(span);
            CHECK(g.eam(i, j) == doctest::Approx(err).epsilon(1e-12));
            CHECK(g.outliers(i, j) == outliers);
            if (err < best) {
                best = err;
                best_w = w;
                best_b = betas[j];
            }
        }
    }
    CHECK(g.best_window == best_w);
    CHECK(g.best_beta == best_b);
}
