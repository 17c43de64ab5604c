#pragma once

#include "crisk/config.hpp"
#include "crisk/ensemble.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace crisk {

enum class Stage { Config = 1, Ingest, Preprocess, Train, Select, Master, Report, Predict };

std::string_view to_string(Stage s) noexcept;

/// A library error tagged with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(Stage stage, const Error& cause)
        : Error(cause.code(), std::string(to_string(stage)) + " stage: " + cause.what()), stage_(stage) {}

    Stage stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return static_cast<int>(stage_); }

private:
    Stage stage_;
};

/// Runs `fn`, rethrowing any library error as a StageError for `stage`.
template <typename F>
decltype(auto) in_stage(Stage stage, F&& fn) {
    try {
        return std::forward<F>(fn)();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    }
}

using Progress = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// Stages

std::vector<MonthlySeries> ingest(const PipelineConfig& cfg);

struct PreprocessOutput {
    AlignedFrame features;
    std::vector<TrainingMatrix> matrices;
};

PreprocessOutput preprocess_stage(const PipelineConfig& cfg, const std::vector<MonthlySeries>& raw);

std::vector<Candidate> train_stage(const PipelineConfig& cfg, const std::vector<TrainingMatrix>& matrices,
                                   const Progress& progress = {});

Selection select_stage(const PipelineConfig& cfg, const std::vector<Candidate>& candidates);

EnsembleRecord master_stage(const PipelineConfig& cfg, const Selection& selection,
                            const std::vector<MonthlySeries>& raw);

// ---------------------------------------------------------------------------
// Run directory and manifest

/// features.csv, matrices/<label>.csv and, when the indicator history allows, var_grid.csv.
void write_preprocess_artifacts(const PipelineConfig& cfg, const std::vector<MonthlySeries>& raw,
                                const PreprocessOutput& pre, const std::filesystem::path& run_dir);

void write_selection(const Selection& selection, const std::filesystem::path& run_dir);
/// Members named in selection.json, looked up among `candidates`.
Selection read_selection(const std::filesystem::path& run_dir, const std::vector<Candidate>& candidates);

/// `<output.dir>/<UTC timestamp>-<config hash>`.
std::filesystem::path new_run_dir(const PipelineConfig& cfg);

nlohmann::json candidate_to_json(const Candidate& c, const std::string& model_path);
Candidate candidate_from_json(const nlohmann::json& j, const std::filesystem::path& run_dir);

/// Writes models/<label>.net and returns the JSON array describing every candidate.
nlohmann::json save_candidates(const std::vector<Candidate>& candidates, const std::filesystem::path& run_dir);
std::vector<Candidate> load_candidates(const nlohmann::json& array, const std::filesystem::path& run_dir);

struct Manifest {
    nlohmann::json json;
    std::filesystem::path run_dir;
};

/// Builds the manifest for a finished ensemble and writes its models.
nlohmann::json build_manifest(const PipelineConfig& cfg, const std::vector<Candidate>& candidates,
                              const Selection& selection, const EnsembleRecord& record,
                              const std::filesystem::path& run_dir);

/// Writes `manifest.json` through a temporary file and a rename.
void write_json_atomic(const nlohmann::json& j, const std::filesystem::path& file);
nlohmann::json read_json(const std::filesystem::path& file);

/// Loads and checks `manifest.json`; IncompleteManifest when anything is missing.
Manifest load_manifest(const std::filesystem::path& run_dir);

/// Same manifest with the creation timestamp removed.
nlohmann::json without_timestamps(nlohmann::json j);

/// Members and master rebuilt from a manifest.
EnsembleRecord record_from_manifest(const Manifest& m);

struct RunResult {
    std::filesystem::path run_dir;
    nlohmann::json manifest;
};

/// Every stage from ingest to reports. Intermediate artifacts land in `run_dir`
/// (a fresh one from new_run_dir when empty).
RunResult run_pipeline(const PipelineConfig& cfg, std::filesystem::path run_dir = {}, const Progress& progress = {});

// ---------------------------------------------------------------------------
// Reports

struct GroupSummary {
    int key = 0;  // base set id or lag
    int networks = 0;
    int finite = 0;
    int perfect = 0;
    std::optional<double> mean_ism;  // over finite indexes
    int ep_defined = 0;
    std::optional<double> mean_norm_ep;
};

/// Mean ISM and norm_EP by `key(candidate)`; perfect strategies are counted, not averaged.
std::vector<GroupSummary> summarize_by(const std::vector<Candidate>& candidates,
                                       const std::function<int(const Candidate&)>& key);

struct DivergenceRow {
    YearMonth month;
    int up = 0;
    int members = 0;
    double percent_up = 0.0;
};

std::vector<DivergenceRow> divergence_by_date(const std::vector<Candidate>& members, const TrainingMatrix& master_matrix);

/// Writes the report files under `<run_dir>/reports` and returns their paths.
std::vector<std::filesystem::path> write_reports(const Manifest& manifest, const std::vector<std::string>& formats);

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
    YearMonth target_month;
    YearMonth last_observed;
    double last_actual = 0.0;
    Vector<double> member_forecasts;
    std::vector<std::string> member_labels;
    NextForecast forecast;
};

/// Next-month forecast from a manifest and the latest data named by `cfg`.
Prediction predict_from_manifest(const Manifest& manifest, const PipelineConfig& cfg);

}  // namespace crisk
