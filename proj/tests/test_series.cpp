#include "crisk/series.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace crisk;

namespace {

std::vector<MonthlySeries> load_text(const std::string& text, const std::vector<ColumnSpec>& cols) {
    std::istringstream in(text);
    return load_series(in, cols);
}

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

}  // namespace

TEST_CASE("YearMonth keys are consecutive") {
    const YearMonth dec(2001, 12);
    CHECK((dec + 1) == YearMonth(2002, 1));
    CHECK((YearMonth(2002, 1) - dec) == 1);
    CHECK(dec.str() == "2001-12");
    CHECK(YearMonth::parse("2001-03") == YearMonth(2001, 3));
    CHECK_FALSE(YearMonth::parse("2001-13"));
    CHECK_FALSE(YearMonth::parse("march"));
}

TEST_CASE("load_series reads a well-formed file") {
    const auto s = load_text("date,a,b\n2001-01,1.5,10\n2001-02,2.5,20\n2001-03,3.5,30\n", {{"x", "b"}});
    REQUIRE(s.size() == 1);
    CHECK(s[0].name() == "x");
    CHECK(s[0].size() == 3);
    CHECK(s[0].start() == YearMonth(2001, 1));
    CHECK(s[0][2] == 30.0);
}

TEST_CASE("load_series rejects broken input and names the row") {
    CHECK(code_of([] { load_text("date,a\n2001-01,1\n2001-03,2\n", {{"a", "a"}}); }) == ErrorCode::GapInDates);
    CHECK(code_of([] { load_text("date,a\n2001-01,1\n2001-01,2\n", {{"a", "a"}}); }) == ErrorCode::DuplicateDate);
    CHECK(code_of([] { load_text("date,a\n2001-02,1\n2001-01,2\n", {{"a", "a"}}); }) == ErrorCode::UnorderedDates);
    CHECK(code_of([] { load_text("date,a\n2001-01,1\n", {{"b", "b"}}); }) == ErrorCode::MissingColumn);
    try {
        load_text("date,a\n2001-01,1\n2001-02,n/a\n2001-03,3\n", {{"a", "a"}});
        FAIL("expected UnparseableValue");
    } catch (const RowError& e) {
        CHECK(e.code() == ErrorCode::UnparseableValue);
        CHECK(e.row() == 2);
    }
    CHECK(code_of([] { load_series(std::filesystem::path("/nonexistent/x.csv"), {{"a", "a"}}); }) ==
          ErrorCode::MissingFile);
}

TEST_CASE("align keeps the intersection") {
    const MonthlySeries a("a", YearMonth(2001, 1), Vector<double>::LinSpaced(12, 1, 12));
    const MonthlySeries b("b", YearMonth(2001, 6), Vector<double>::LinSpaced(13, 100, 112));
    const auto f = align({a, b});
    CHECK(f.start() == YearMonth(2001, 6));
    CHECK(f.last() == YearMonth(2001, 12));
    CHECK(f.rows() == 7);
    CHECK(f.column("a")(0) == 6.0);
    CHECK(f.column("b")(6) == 106.0);

    const auto same = align({a, a.renamed("c")});
    CHECK(same.rows() == 12);
    CHECK(same.column("c").isApprox(a.values()));

    const MonthlySeries late("late", YearMonth(2003, 1), Vector<double>::Ones(3));
    CHECK(code_of([&] { align({a, late}); }) == ErrorCode::EmptyIntersection);
}

TEST_CASE("log_returns, basis points and loss sign") {
    const MonthlySeries s("x", YearMonth(2000, 1), (Vector<double>(3) << 100.0, 110.0, 99.0).finished());
    const auto r = log_returns(s);
    REQUIRE(r.size() == 2);
    CHECK(r.start() == YearMonth(2000, 2));
    CHECK(r[0] == doctest::Approx(std::log(1.1)).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(std::log(0.9)).epsilon(1e-15));
    const auto bp = to_basis_points(r);
    CHECK(bp[0] == doctest::Approx(std::log(1.1) * 10000.0));
    CHECK(positive_component(bp)[1] == doctest::Approx(-std::log(0.9) * 10000.0));

    const MonthlySeries bad("x", YearMonth(2000, 1), (Vector<double>(2) << 1.0, 0.0).finished());
    CHECK(code_of([&] { log_returns(bad); }) == ErrorCode::NonPositiveValue);
}

TEST_CASE("returns recompose the series") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(50.0, 150.0);
    Vector<double> v(40);
    for (auto& x : v) x = u(rng);
    const MonthlySeries s("x", YearMonth(1999, 5), v);
    const auto r = log_returns(s);
    double level = v(0);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        level *= std::exp(r[i]);
        CHECK(level == doctest::Approx(v(i + 1)).epsilon(1e-12));
    }
}

TEST_CASE("write_csv round trips through load_series") {
    const MonthlySeries a("a", YearMonth(2001, 1), (Vector<double>(3) << 0.1, 1.0 / 3.0, 2e-7).finished());
    const MonthlySeries b("b", YearMonth(2001, 1), (Vector<double>(3) << -5.0, 7.25, 1e10).finished());
    std::ostringstream out;
    write_csv(out, align({a, b}));
    const auto back = load_text(out.str(), {{"a", "a"}, {"b", "b"}});
    CHECK(back[0].values() == a.values());
    CHECK(back[1].values() == b.values());
}
