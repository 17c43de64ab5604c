#include "crisk/ensemble.hpp"

#include <algorithm>
#include <set>

namespace crisk {

std::string Candidate::label() const { return "set" + std::to_string(base_set_id) + "_lag" + std::to_string(lag); }

Candidate make_candidate(const TrainingMatrix& matrix, const TrainConfig& cfg, std::vector<RestartOutcome> ranked) {
    if (ranked.empty()) throw Error(ErrorCode::AllDiverged, matrix.label() + ": no trained restart");
    const auto [train_part, test_part] = split(matrix, cfg);
    auto& best = ranked.front();
    Candidate c;
    c.base_set_id = matrix.base_set_id;
    c.lag = matrix.lag;
    c.recipe = matrix.recipe;
    c.input_names = matrix.input_names;
    c.model = std::move(best.model);
    c.seed = best.seed;
    c.restart = best.restart;
    c.epochs = best.epochs;
    c.ism = best.score.ism;
    c.ep = best.score.ep;
    c.forecast_months = test_part.months_out;
    c.forecasts = best.test_predictions;
    c.actual = test_part.actual;
    c.previous_actual = test_part.previous_actual();
    for (const auto& r : ranked) c.restart_isms.push_back(r.score.ism);
    return c;
}

bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
    if (a.ism != b.ism) return a.ism > b.ism;
    if (a.norm_ep_or_floor() != b.norm_ep_or_floor()) return a.norm_ep_or_floor() > b.norm_ep_or_floor();
    if (a.base_set_id != b.base_set_id) return a.base_set_id < b.base_set_id;
    return a.lag < b.lag;
}

Selection select_best(std::vector<Candidate> candidates, std::size_t k) {
    if (candidates.empty()) throw Error(ErrorCode::NoCandidates, "no candidate networks to select from");
    std::stable_sort(candidates.begin(), candidates.end(), ranks_before);
    Selection s;
    if (candidates.size() < k) {
        s.warning = "only " + std::to_string(candidates.size()) + " candidates for " + std::to_string(k) + " member slots";
    } else {
        candidates.resize(k);
    }
    s.members = std::move(candidates);
    return s;
}

TrainingMatrix build_master_matrix(const std::vector<Candidate>& members, const MonthlySeries& actual_output) {
    if (members.empty()) throw Error(ErrorCode::EmptyEnsemble, "master matrix needs at least one member");
    std::set<YearMonth> common(members.front().forecast_months.begin(), members.front().forecast_months.end());
    for (const auto& m : members) {
        std::set<YearMonth> mine(m.forecast_months.begin(), m.forecast_months.end());
        std::set<YearMonth> both;
        std::set_intersection(common.begin(), common.end(), mine.begin(), mine.end(), std::inserter(both, both.end()));
        common = std::move(both);
    }
    if (common.empty()) throw Error(ErrorCode::DateMismatch, "member forecasts share no month");

    TrainingMatrix mm;
    mm.base_set_id = kMasterSetId;
    mm.lag = 0;
    mm.recipe = OutputRecipe::Raw;
    const auto rows = static_cast<Eigen::Index>(common.size());
    const auto cols = static_cast<Eigen::Index>(members.size());
    mm.inputs.resize(rows, cols);
    mm.output.resize(rows);
    mm.actual.resize(rows);
    mm.trailing.resize(rows, 3);
    for (const auto& m : members) mm.input_names.push_back(m.label());

    Eigen::Index i = 0;
    for (YearMonth month : common) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& mem = members[static_cast<std::size_t>(j)];
            const auto it = std::find(mem.forecast_months.begin(), mem.forecast_months.end(), month);
            mm.inputs(i, j) = mem.forecasts(it - mem.forecast_months.begin());
        }
        const auto value = actual_output.at(month);
        if (!value) throw Error(ErrorCode::DateMismatch, "no realized target for " + month.str());
        mm.output(i) = *value;
        mm.actual(i) = *value;
        for (int k = 0; k < 3; ++k) {
            const auto prev = actual_output.at(month - (3 - k));
            if (!prev) throw Error(ErrorCode::DateMismatch, "no realized target before " + month.str());
            mm.trailing(i, k) = *prev;
        }
        mm.months_out.push_back(month);
        ++i;
    }
    return mm;
}

MasterResult train_master(const TrainingMatrix& matrix, const TrainConfig& cfg) {
    auto ranked = multi_restart_train(matrix, cfg);
    const auto [train_part, test_part] = split(matrix, cfg);
    MasterResult r;
    for (const auto& o : ranked) r.restart_isms.push_back(o.score.ism);
    r.best = std::move(ranked.front());
    r.test_months = test_part.months_out;
    r.test_actual = test_part.actual;
    r.test_previous = test_part.trailing(0, 2);
    return r;
}

NextForecast predict_next(const NetworkModel<double>& master, const Vector<double>& latest_member_forecasts,
                          double last_actual) {
    if (latest_member_forecasts.size() != master.input_count())
        throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(master.input_count()) +
                                                      " member forecasts, got " +
                                                      std::to_string(latest_member_forecasts.size()));
    NextForecast f;
    f.value = forward(master, latest_member_forecasts);
    f.direction = static_cast<int>(position_from_forecast(f.value, last_actual));
    f.members = static_cast<int>(latest_member_forecasts.size());
    for (Eigen::Index i = 0; i < latest_member_forecasts.size(); ++i)
        if (position_from_forecast(latest_member_forecasts(i), last_actual) > 0) ++f.members_up;
    return f;
}

NextForecast predict_next(const EnsembleRecord& record, const Vector<double>& latest_member_forecasts, double last_actual) {
    return predict_next(record.master.best.model, latest_member_forecasts, last_actual);
}

}  // namespace crisk
