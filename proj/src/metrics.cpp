#include "crisk/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

namespace crisk {

double standard_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double students_t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

Vector<double> divergence_percentage(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& votes) {
    if (votes.rows() == 0) throw Error(ErrorCode::EmptyEnsemble, "no networks voted");
    Vector<double> out(votes.cols());
    for (Eigen::Index d = 0; d < votes.cols(); ++d)
        out(d) = 100.0 * static_cast<double>(votes.col(d).count()) / static_cast<double>(votes.rows());
    return out;
}

ForecastScore score_forecasts(const Vector<double>& predicted, const Vector<double>& actual, double previous) {
    if (predicted.size() != actual.size()) throw Error(ErrorCode::LengthMismatch, "predicted and actual lengths differ");
    const Eigen::Index n = actual.size();
    Vector<double> pred(n + 1), act(n + 1);
    pred << previous, predicted;
    act << previous, actual;

    ForecastScore s;
    s.report = equity_curves(pred, act);
    s.ism = modified_sharpe(s.report);
    s.directional_accuracy = directional_accuracy(pred, act);
    try {
        s.ep = excess_predictability_from(s.report.positions, s.report.returns);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateStrategy && e.code() != ErrorCode::InsufficientHistory) throw;
    }
    return s;
}

}  // namespace crisk
