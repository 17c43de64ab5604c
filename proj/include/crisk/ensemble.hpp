#pragma once

#include "crisk/metrics.hpp"
#include "crisk/neural.hpp"
#include "crisk/preprocess.hpp"

#include <optional>
#include <string>
#include <vector>

namespace crisk {

/// Best restart of one training matrix together with its out-of-sample record.
struct Candidate {
    int base_set_id = 0;
    int lag = 0;
    OutputRecipe recipe = OutputRecipe::Raw;
    std::vector<std::string> input_names;
    NetworkModel<double> model;
    std::uint64_t seed = 0;
    int restart = 0;
    int epochs = 0;
    SharpeIndex<double> ism = SharpeIndex<double>::finite(0.0);
    std::optional<EPResult<double>> ep;
    std::vector<YearMonth> forecast_months;  // test months
    Vector<double> forecasts;                // target units
    Vector<double> actual;
    Vector<double> previous_actual;
    std::vector<SharpeIndex<double>> restart_isms;  // every restart, ranked

    std::string label() const;
    /// norm_EP or -1 when the test strategy was degenerate.
    double norm_ep_or_floor() const noexcept { return ep ? ep->norm_ep : -1.0; }
};

/// Builds a candidate from the ranked restarts of `matrix`.
Candidate make_candidate(const TrainingMatrix& matrix, const TrainConfig& cfg, std::vector<RestartOutcome> ranked);

/// Descending ISM, then higher norm_EP, then lower base set id, then lower lag.
bool ranks_before(const Candidate& a, const Candidate& b) noexcept;

struct Selection {
    std::vector<Candidate> members;
    std::optional<std::string> warning;
};

Selection select_best(std::vector<Candidate> candidates, std::size_t k = 10);

/// Lag-0 matrix whose columns are the members' forecasts for the months all
/// of them cover, paired with the realized target.
TrainingMatrix build_master_matrix(const std::vector<Candidate>& members, const MonthlySeries& actual_output);

struct MasterResult {
    RestartOutcome best;
    std::vector<YearMonth> test_months;
    Vector<double> test_actual;
    double test_previous = 0.0;
    std::vector<SharpeIndex<double>> restart_isms;
};

MasterResult train_master(const TrainingMatrix& matrix, const TrainConfig& cfg);

struct EnsembleRecord {
    std::vector<Candidate> members;
    TrainingMatrix master_matrix;
    MasterResult master;
};

struct NextForecast {
    double value = 0.0;
    int direction = 1;  // +1 rise, -1 fall, against the last observed actual
    int members_up = 0;
    int members = 0;
};

NextForecast predict_next(const EnsembleRecord& record, const Vector<double>& latest_member_forecasts, double last_actual);
NextForecast predict_next(const NetworkModel<double>& master, const Vector<double>& latest_member_forecasts,
                          double last_actual);

}  // namespace crisk
