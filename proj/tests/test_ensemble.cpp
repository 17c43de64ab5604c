#include "crisk/ensemble.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

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

Candidate scored(int set, int lag, double ism, std::optional<double> norm_ep) {
    Candidate c;
    c.base_set_id = set;
    c.lag = lag;
    c.ism = SharpeIndex<double>::finite(ism);
    if (norm_ep) {
        c.ep = EPResult<double>{};
        c.ep->norm_ep = *norm_ep;
    }
    return c;
}

MonthlySeries random_walk(int months, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 0.04);
    Vector<double> v(months);
    v(0) = 800.0;
    for (int i = 1; i < months; ++i) v(i) = v(i - 1) * std::exp(z(rng));
    return MonthlySeries("embi_ve", YearMonth(2000, 1), v);
}

// Mean-reverting levels whose monthly moves are 3..8 %, so a small fitting
// error cannot flip the direction of a move.
MonthlySeries stepped_series(int months, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> size(0.03, 0.08), coin(0.0, 1.0);
    Vector<double> v(months);
    double x = 0.0;
    for (int i = 0; i < months; ++i) {
        const bool down = x > 0 ? coin(rng) < 0.7 : coin(rng) < 0.3;
        x += down ? -size(rng) : size(rng);
        v(i) = 800.0 * std::exp(x);
    }
    return MonthlySeries("embi_ve", YearMonth(2000, 1), v);
}

Candidate forecaster(int set, const MonthlySeries& actual, YearMonth from, int count, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, noise);
    Candidate c;
    c.base_set_id = set;
    c.lag = 1;
    c.forecasts.resize(count);
    c.actual.resize(count);
    c.previous_actual.resize(count);
    for (int i = 0; i < count; ++i) {
        const YearMonth m = from + i;
        c.forecast_months.push_back(m);
        c.actual(i) = *actual.at(m);
        c.previous_actual(i) = *actual.at(m - 1);
        c.forecasts(i) = c.actual(i) * std::exp(z(rng));
    }
    return c;
}

}  // namespace

TEST_CASE("select_best keeps a prefix of the sorted candidates") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5.0, 30.0);
    std::vector<Candidate> all;
    for (int set = 1; set <= 10; ++set)
        for (int lag = 1; lag <= 6; ++lag) all.push_back(scored(set, lag, std::round(u(rng)), u(rng) * 3));
    all.push_back(scored(3, 9, 100.0, std::nullopt));
    all.back().ism = SharpeIndex<double>::perfect();
    REQUIRE(all.size() == 61);

    const auto s = select_best(all, 10);
    CHECK_FALSE(s.warning);
    REQUIRE(s.members.size() == 10);
    CHECK(s.members.front().ism.is_perfect());
    auto sorted = all;
    std::sort(sorted.begin(), sorted.end(), ranks_before);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(s.members[i].label() == sorted[i].label());
        if (i > 0) CHECK_FALSE(s.members[i].ism > s.members[i - 1].ism);
    }
    for (std::size_t i = 10; i < sorted.size(); ++i) CHECK_FALSE(sorted[i].ism > s.members[9].ism);
}

TEST_CASE("select_best tie-breaks and short lists") {
    const auto s = select_best({scored(1, 1, 4.0, 60.0), scored(2, 1, 4.0, 80.0), scored(3, 1, 4.0, std::nullopt)}, 10);
    REQUIRE(s.warning);
    REQUIRE(s.members.size() == 3);
    CHECK(s.members[0].base_set_id == 2);
    CHECK(s.members[1].base_set_id == 1);
    CHECK(s.members[2].base_set_id == 3);

    const auto by_set = select_best({scored(5, 2, 4.0, 70.0), scored(4, 3, 4.0, 70.0), scored(4, 1, 4.0, 70.0)}, 2);
    CHECK_FALSE(by_set.warning);
    CHECK(by_set.members[0].label() == "set4_lag1");
    CHECK(by_set.members[1].label() == "set4_lag3");

    CHECK(code_of([] { select_best({}); }) == ErrorCode::NoCandidates);
}

TEST_CASE("master matrix rows are the intersection of member months") {
    const auto actual = random_walk(150, 9);
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> start(10, 40), len(60, 80);  // ranges always overlap
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Candidate> members;
        const int k = 2 + trial % 9;
        for (int j = 0; j < k; ++j)
            members.push_back(forecaster(j + 1, actual, YearMonth(2000, 1) + start(rng), len(rng), 0.01, 100 + j));
        std::map<YearMonth, int> count;
        for (const auto& m : members)
            for (auto d : m.forecast_months) ++count[d];
        std::vector<YearMonth> expected;
        for (const auto& [d, c] : count)
            if (c == k) expected.push_back(d);

        const auto mm = build_master_matrix(members, actual);
        CHECK(mm.months_out == expected);
        CHECK(mm.lag == 0);
        CHECK(mm.base_set_id == kMasterSetId);
        CHECK(mm.inputs.cols() == k);
        CHECK(mm.inputs.rows() == static_cast<Eigen::Index>(expected.size()));
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            CHECK(mm.actual(row) == *actual.at(expected[i]));
            CHECK(mm.previous_actual()(row) == *actual.at(expected[i] - 1));
            for (int j = 0; j < k; ++j) {
                const auto& mem = members[static_cast<std::size_t>(j)];
                const auto pos = std::find(mem.forecast_months.begin(), mem.forecast_months.end(), expected[i]) -
                                 mem.forecast_months.begin();
                CHECK(mm.inputs(row, j) == mem.forecasts(pos));
            }
        }
    }
}

TEST_CASE("ten members over 36 months give a 36 x 10 matrix") {
    const auto actual = random_walk(120, 3);
    std::vector<Candidate> members;
    for (int j = 0; j < 10; ++j) members.push_back(forecaster(j + 1, actual, YearMonth(2006, 1), 36, 0.02, j));
    const auto mm = build_master_matrix(members, actual);
    CHECK(mm.inputs.rows() == 36);
    CHECK(mm.inputs.cols() == 10);
    CHECK(mm.output.size() == 36);

    std::vector<Candidate> disjoint{forecaster(1, actual, YearMonth(2003, 1), 12, 0.02, 1),
                                    forecaster(2, actual, YearMonth(2005, 1), 12, 0.02, 2)};
    CHECK(code_of([&] { build_master_matrix(disjoint, actual); }) == ErrorCode::DateMismatch);
    CHECK(code_of([&] { build_master_matrix({}, actual); }) == ErrorCode::EmptyEnsemble);
}

TEST_CASE("predict_next") {
    // single linear layer with equal weights: the consensus of the members
    auto master = NetworkModel<double>::zeros({4, 1});
    master.output_activation = Activation::Identity;
    master.weights[0] << 0.25, 0.25, 0.25, 0.25, 0.0;
    const Vector<double> votes = (Vector<double>(4) << 101.0, 99.0, 104.0, 98.0).finished();
    const auto f = predict_next(master, votes, 100.0);
    CHECK(f.value == doctest::Approx(votes.mean()).epsilon(1e-14));
    CHECK(f.direction == 1);
    CHECK(f.members_up == 2);
    CHECK(f.members == 4);

    // inputs all equal to the last actual, master biased downward
    master.weights[0](0, 4) = -3.0;
    const auto down = predict_next(master, Vector<double>::Constant(4, 100.0), 100.0);
    CHECK(down.direction == -1);
    CHECK(down.members_up == 4);

    CHECK(code_of([&] { predict_next(master, Vector<double>::Constant(3, 1.0), 1.0); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("a master fed an oracle member does about as well as that member") {
    const auto actual = stepped_series(160, 21);
    // exact levels, except every seventh month called the wrong way by 3 %
    auto oracle_member = forecaster(1, actual, YearMonth(2003, 1), 100, 0.0, 1);
    for (int i = 3; i < 100; i += 7) {
        const double prev = oracle_member.previous_actual(i);
        oracle_member.forecasts(i) = prev * (oracle_member.actual(i) >= prev ? 0.97 : 1.03);
    }
    std::vector<Candidate> members{oracle_member};
    for (int j = 2; j <= 4; ++j) members.push_back(forecaster(j, actual, YearMonth(2003, 1), 100, 0.08, j));
    const auto mm = build_master_matrix(members, actual);

    TrainConfig cfg;
    cfg.restarts = 12;
    cfg.cycles = 2000;
    cfg.stop_error = 0.005;
    const auto result = train_master(mm, cfg);
    REQUIRE(result.test_months.size() == 40);

    const auto [tr, te] = split(mm, cfg);
    const Vector<double> oracle_test = te.inputs.col(0);
    const auto oracle = score_forecasts(oracle_test, te.actual, te.trailing(0, 2));
    REQUIRE_FALSE(oracle.ism.is_perfect());
    REQUIRE(oracle.ism.value() > 0);
    CHECK(result.best.score.ism.rank_value() >= 0.9 * oracle.ism.value());

    const auto again = train_master(mm, cfg);
    CHECK(again.best.restart == result.best.restart);
    CHECK(again.best.test_predictions == result.best.test_predictions);
}
