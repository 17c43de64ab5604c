#pragma once

#include "crisk/series.hpp"

#include <Eigen/Core>

#include <cmath>
#include <compare>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace crisk {

/// Modified Sharpe Index value. A strategy without a single wrong call has
/// no negative volatility; it is represented by a sentinel ranked above
/// every finite index.
template <typename Scalar>
class SharpeIndex {
public:
    static SharpeIndex perfect() noexcept { return SharpeIndex(true, Scalar(0)); }
    static SharpeIndex finite(Scalar v) noexcept { return SharpeIndex(false, v); }

    bool is_perfect() const noexcept { return perfect_; }
    /// Only meaningful when !is_perfect().
    Scalar value() const noexcept { return value_; }
    /// +inf for the sentinel; handy for sorting and medians.
    Scalar rank_value() const noexcept { return perfect_ ? std::numeric_limits<Scalar>::infinity() : value_; }

    friend std::partial_ordering operator<=>(const SharpeIndex& a, const SharpeIndex& b) noexcept {
        if (a.perfect_ || b.perfect_) return a.perfect_ == b.perfect_ ? std::partial_ordering::equivalent
                                             : (a.perfect_ ? std::partial_ordering::greater : std::partial_ordering::less);
        return a.value_ <=> b.value_;
    }
    friend bool operator==(const SharpeIndex& a, const SharpeIndex& b) noexcept {
        return (a <=> b) == std::partial_ordering::equivalent;
    }

private:
    SharpeIndex(bool p, Scalar v) : perfect_(p), value_(v) {}
    bool perfect_ = false;
    Scalar value_ = 0;
};

template <typename Scalar>
struct StrategyFailure {
    Eigen::Index index;  // position in the returns vector
    Scalar magnitude;    // |log return| of the wrongly called move
};

/// Trading record of a forecast: curves in percent units, failures in log-return units.
template <typename Scalar>
struct EquityReport {
    Vector<Scalar> returns;    // ln(actual_t / actual_{t-1})
    Vector<Scalar> positions;  // +1 long, -1 short
    Vector<Scalar> eq;
    Vector<Scalar> pe;
    std::vector<StrategyFailure<Scalar>> failures;
    Scalar ave_negative_vol = 0;
    std::optional<Scalar> q_ratio;
    std::optional<SharpeIndex<Scalar>> ism;
};

template <typename Scalar>
struct EPResult {
    Scalar a_t = 0;
    Scalar b_t = 0;
    Scalar variance_hat = 0;
    Scalar statistic = 0;
    Scalar norm_ep = 0;  // percent
};

template <typename Scalar>
struct RegressionResult {
    Scalar slope = 0;
    Scalar intercept = 0;  // fitted value at x_mean (centered form)
    Scalar x_mean = 0;
    Scalar r = 0;
    Scalar r_squared = 0;
    Scalar p_value = 1;
    Eigen::Index n = 0;

    Scalar intercept_at_zero() const noexcept { return intercept - slope * x_mean; }
    Scalar predict(Scalar x) const noexcept { return intercept + slope * (x - x_mean); }
};

/// Long when a rise is forecast; a forecast equal to the last actual counts as long.
template <typename Scalar>
Scalar position_from_forecast(Scalar forecast, Scalar last_actual) noexcept {
    return forecast < last_actual ? Scalar(-1) : Scalar(1);
}

template <typename DerivedP, typename DerivedA>
std::pair<Vector<typename DerivedA::Scalar>, Vector<typename DerivedA::Scalar>> positions_and_returns(
    const Eigen::MatrixBase<DerivedP>& predicted, const Eigen::MatrixBase<DerivedA>& actual) {
    using Scalar = typename DerivedA::Scalar;
    if (predicted.size() != actual.size())
        throw Error(ErrorCode::LengthMismatch, "predicted and actual lengths differ");
    if (actual.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two actual values");
    for (Eigen::Index i = 0; i < actual.size(); ++i)
        if (!(actual(i) > Scalar(0))) throw Error(ErrorCode::NonPositiveValue, "actual values must be positive");
    const Eigen::Index n = actual.size() - 1;
    Vector<Scalar> pos(n), ret(n);
    for (Eigen::Index t = 1; t <= n; ++t) {
        ret(t - 1) = std::log(actual(t) / actual(t - 1));
        pos(t - 1) = position_from_forecast<Scalar>(predicted(t), actual(t - 1));
    }
    return {std::move(pos), std::move(ret)};
}

template <typename DerivedS, typename DerivedR>
EquityReport<typename DerivedR::Scalar> equity_from_positions(const Eigen::MatrixBase<DerivedS>& positions,
                                                              const Eigen::MatrixBase<DerivedR>& returns) {
    using Scalar = typename DerivedR::Scalar;
    if (positions.size() != returns.size()) throw Error(ErrorCode::LengthMismatch, "positions and returns differ");
    EquityReport<Scalar> rep;
    rep.returns = returns;
    rep.positions = positions;
    const Eigen::Index n = returns.size();
    rep.eq.resize(n);
    rep.pe.resize(n);
    Scalar eq = 0, pe = 0, lost = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const Scalar gain = positions(t) * returns(t);
        eq += gain * Scalar(100);
        pe += std::abs(returns(t)) * Scalar(100);
        rep.eq(t) = eq;
        rep.pe(t) = pe;
        if (gain < Scalar(0)) {
            rep.failures.push_back({t, std::abs(returns(t))});
            lost += std::abs(returns(t));
        }
    }
    rep.ave_negative_vol = rep.failures.empty() ? Scalar(0) : lost / static_cast<Scalar>(rep.failures.size());
    return rep;
}

/// Equity and perfect-equity curves of the strategy that goes long when
/// predicted_t exceeds actual_{t-1}. predicted(0) is unused.
template <typename DerivedP, typename DerivedA>
EquityReport<typename DerivedA::Scalar> equity_curves(const Eigen::MatrixBase<DerivedP>& predicted,
                                                      const Eigen::MatrixBase<DerivedA>& actual) {
    const auto [pos, ret] = positions_and_returns(predicted, actual);
    return equity_from_positions(pos, ret);
}

/// OLS slope of curve_i * (1 + 10 i/n) against i = 1..n.
template <typename Derived>
typename Derived::Scalar weighted_slope(const Eigen::MatrixBase<Derived>& curve) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = curve.size();
    if (n < 2) throw Error(ErrorCode::DegenerateInput, "weighted slope needs at least two points");
    const Scalar nn = static_cast<Scalar>(n);
    const Scalar x_mean = (nn + Scalar(1)) / Scalar(2);
    Scalar y_mean = 0;
    for (Eigen::Index i = 1; i <= n; ++i) y_mean += curve(i - 1) * (Scalar(1) + Scalar(10) * Scalar(i) / nn);
    y_mean /= nn;
    Scalar sxy = 0, sxx = 0;
    for (Eigen::Index i = 1; i <= n; ++i) {
        const Scalar dx = Scalar(i) - x_mean;
        const Scalar y = curve(i - 1) * (Scalar(1) + Scalar(10) * Scalar(i) / nn);
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// ISM = (slope(eq)/slope(pe)) / ave_negative_vol. Also fills report.q_ratio / report.ism.
template <typename Scalar>
SharpeIndex<Scalar> modified_sharpe(EquityReport<Scalar>& report) {
    if (report.failures.empty()) {
        report.q_ratio = Scalar(1);
        report.ism = SharpeIndex<Scalar>::perfect();
        return *report.ism;
    }
    const Scalar m_pe = weighted_slope(report.pe);
    if (m_pe == Scalar(0)) throw Error(ErrorCode::ZeroPerfectSlope, "perfect-equity slope is zero");
    const Scalar q = weighted_slope(report.eq) / m_pe;
    report.q_ratio = q;
    report.ism = SharpeIndex<Scalar>::finite(q / report.ave_negative_vol);
    return *report.ism;
}

template <typename Scalar>
SharpeIndex<Scalar> modified_sharpe(const EquityReport<Scalar>& report) {
    EquityReport<Scalar> copy = report;
    return modified_sharpe(copy);
}

template <typename DerivedE, typename DerivedR>
typename DerivedE::Scalar mean_abs_error(const Eigen::MatrixBase<DerivedE>& estimated,
                                         const Eigen::MatrixBase<DerivedR>& real) {
    if (estimated.size() != real.size()) throw Error(ErrorCode::LengthMismatch, "estimated and real lengths differ");
    if (estimated.size() == 0) throw Error(ErrorCode::DegenerateInput, "mean absolute error of empty vectors");
    return (estimated - real).cwiseAbs().mean();
}

/// Dates where the realized fall exceeds the VaR band.
template <typename DerivedF, typename DerivedB>
Eigen::Index count_outliers(const Eigen::MatrixBase<DerivedF>& falls, const Eigen::MatrixBase<DerivedB>& band) {
    if (falls.size() != band.size()) throw Error(ErrorCode::LengthMismatch, "falls and band lengths differ");
    return (falls.array() > band.array()).count();
}

double standard_normal_cdf(double x) noexcept;

template <typename DerivedS, typename DerivedR>
EPResult<typename DerivedR::Scalar> excess_predictability_from(const Eigen::MatrixBase<DerivedS>& positions,
                                                               const Eigen::MatrixBase<DerivedR>& returns) {
    using Scalar = typename DerivedR::Scalar;
    if (positions.size() != returns.size()) throw Error(ErrorCode::LengthMismatch, "positions and returns differ");
    const Eigen::Index n = returns.size();
    if (n < 10) throw Error(ErrorCode::InsufficientHistory, "excess predictability needs T >= 10");
    const Scalar T = static_cast<Scalar>(n);
    const Scalar s_mean = positions.sum() / T;
    const Scalar y_mean = returns.sum() / T;
    EPResult<Scalar> ep;
    ep.a_t = positions.dot(returns) / T;
    ep.b_t = s_mean * y_mean;
    const Scalar p_hat = Scalar(0.5) * (Scalar(1) + s_mean);
    const Scalar ssy = (returns.array() - y_mean).square().sum();
    ep.variance_hat = Scalar(4) / (T * T) * p_hat * (Scalar(1) - p_hat) * ssy;
    if (!(ep.variance_hat > Scalar(0)))
        throw Error(ErrorCode::DegenerateStrategy, "positions (or returns) never change sign; EP variance is zero");
    ep.statistic = (ep.a_t - ep.b_t) / std::sqrt(ep.variance_hat);
    ep.norm_ep = static_cast<Scalar>(standard_normal_cdf(static_cast<double>(ep.statistic)) * 100.0);
    return ep;
}

template <typename DerivedP, typename DerivedA>
EPResult<typename DerivedA::Scalar> excess_predictability(const Eigen::MatrixBase<DerivedP>& predicted,
                                                          const Eigen::MatrixBase<DerivedA>& actual) {
    const auto [pos, ret] = positions_and_returns(predicted, actual);
    return excess_predictability_from(pos, ret);
}

/// Share of moves called in the right direction (a flat month is never a miss).
template <typename DerivedP, typename DerivedA>
typename DerivedA::Scalar directional_accuracy(const Eigen::MatrixBase<DerivedP>& predicted,
                                               const Eigen::MatrixBase<DerivedA>& actual) {
    using Scalar = typename DerivedA::Scalar;
    const auto [pos, ret] = positions_and_returns(predicted, actual);
    const Eigen::Index misses = ((pos.array() * ret.array()) < Scalar(0)).count();
    return Scalar(1) - static_cast<Scalar>(misses) / static_cast<Scalar>(ret.size());
}

/// votes(network, date) is true when that network forecasts a rise. Returns percent up per date.
Vector<double> divergence_percentage(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& votes);

double students_t_two_sided_p(double t, double dof);

/// Least squares y = intercept + slope (x - x_mean).
template <typename DerivedX, typename DerivedY>
RegressionResult<typename DerivedY::Scalar> ols_fit(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y) {
    using Scalar = typename DerivedY::Scalar;
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y lengths differ");
    const Eigen::Index n = x.size();
    if (n < 3) throw Error(ErrorCode::DegenerateInput, "regression needs at least three observations");
    RegressionResult<Scalar> r;
    r.n = n;
    r.x_mean = x.mean();
    const Scalar y_mean = y.mean();
    const auto dx = (x.array() - r.x_mean).eval();
    const auto dy = (y.array() - y_mean).eval();
    const Scalar sxx = dx.square().sum();
    const Scalar syy = dy.square().sum();
    const Scalar sxy = (dx * dy).sum();
    if (!(sxx > Scalar(0))) throw Error(ErrorCode::ConstantRegressor, "x is constant");
    r.slope = sxy / sxx;
    r.intercept = y_mean;
    if (!(syy > Scalar(0))) {
        r.r = r.r_squared = Scalar(0);
        r.p_value = Scalar(1);
        return r;
    }
    r.r_squared = std::min(Scalar(1), sxy * sxy / (sxx * syy));
    r.r = std::sqrt(r.r_squared);
    const Scalar sse = std::max(Scalar(0), syy - r.slope * sxy);
    const Scalar dof = static_cast<Scalar>(n - 2);
    if (sse <= syy * Scalar(1e-15)) {
        r.p_value = Scalar(0);
    } else {
        const Scalar se = std::sqrt(sse / dof / sxx);
        r.p_value = static_cast<Scalar>(students_t_two_sided_p(static_cast<double>(r.slope / se), static_cast<double>(dof)));
    }
    return r;
}

/// Full scoring of a forecast window: curves, ISM, and EP when defined.
struct ForecastScore {
    EquityReport<double> report;
    SharpeIndex<double> ism = SharpeIndex<double>::finite(0.0);
    std::optional<EPResult<double>> ep;
    double directional_accuracy = 0.0;
};

/// `previous` is the actual level just before the first forecast month.
ForecastScore score_forecasts(const Vector<double>& predicted, const Vector<double>& actual, double previous);

}  // namespace crisk
