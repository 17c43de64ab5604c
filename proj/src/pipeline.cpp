#include "crisk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

namespace crisk {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Config: return "config";
        case Stage::Ingest: return "ingest";
        case Stage::Preprocess: return "preprocess";
        case Stage::Train: return "train";
        case Stage::Select: return "select";
        case Stage::Master: return "master";
        case Stage::Report: return "report";
        case Stage::Predict: return "predict";
    }
    return "unknown";
}

std::vector<MonthlySeries> ingest(const PipelineConfig& cfg) {
    cfg.validate();
    cfg.check_files();
    std::map<fs::path, std::vector<ColumnSpec>> by_file;
    for (const auto& var : required_variables()) {
        const auto& src = cfg.data.at(var);
        by_file[cfg.resolve(src.file)].push_back({var, src.column.empty() ? var : src.column});
    }
    std::vector<MonthlySeries> out;
    for (const auto& [file, specs] : by_file) {
        auto loaded = load_series(file, specs);
        for (auto& s : loaded) out.push_back(std::move(s));
    }
    return out;
}

PreprocessOutput preprocess_stage(const PipelineConfig& cfg, const std::vector<MonthlySeries>& raw) {
    PreprocessOutput out;
    out.features = derive_features(raw, cfg.preprocess);
    out.matrices = assemble_base_sets(raw, cfg.preprocess);
    return out;
}

std::vector<Candidate> train_stage(const PipelineConfig& cfg, const std::vector<TrainingMatrix>& matrices,
                                   const Progress& progress) {
    std::vector<Candidate> out;
    for (const auto& m : matrices) {
        out.push_back(make_candidate(m, cfg.train, multi_restart_train(m, cfg.train)));
        if (progress) {
            const auto& c = out.back();
            std::ostringstream msg;
            msg << c.label() << ": ISM ";
            if (c.ism.is_perfect()) msg << "perfect";
            else msg << c.ism.value();
            if (c.ep) msg << ", norm_EP " << c.ep->norm_ep;
            progress(msg.str());
        }
    }
    return out;
}

Selection select_stage(const PipelineConfig& cfg, const std::vector<Candidate>& candidates) {
    return select_best(candidates, static_cast<std::size_t>(cfg.members));
}

EnsembleRecord master_stage(const PipelineConfig& cfg, const Selection& selection,
                            const std::vector<MonthlySeries>& raw) {
    const MonthlySeries* target = nullptr;
    for (const auto& s : raw)
        if (s.name() == kEmbiVe) target = &s;
    if (!target) throw Error(ErrorCode::MissingColumn, "no target series");
    EnsembleRecord rec;
    rec.members = selection.members;
    rec.master_matrix = build_master_matrix(rec.members, *target);
    rec.master = train_master(rec.master_matrix, cfg.train);
    return rec;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json ism_json(const SharpeIndex<double>& s) { return s.is_perfect() ? json("perfect") : json(s.value()); }

SharpeIndex<double> ism_from(const json& j) {
    if (j.is_string() && j.get<std::string>() == "perfect") return SharpeIndex<double>::perfect();
    return SharpeIndex<double>::finite(j.get<double>());
}

json vec_json(const Vector<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector<double> vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json months_json(const std::vector<YearMonth>& months) {
    json a = json::array();
    for (auto m : months) a.push_back(m.str());
    return a;
}

std::vector<YearMonth> months_from(const json& j) {
    std::vector<YearMonth> out;
    for (const auto& s : j) {
        const auto m = YearMonth::parse(s.get<std::string>());
        if (!m) throw Error(ErrorCode::IncompleteManifest, "bad month '" + s.get<std::string>() + "'");
        out.push_back(*m);
    }
    return out;
}

json matrix_json(const Matrix<double>& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

Matrix<double> matrix_from(const json& j, Eigen::Index cols) {
    Matrix<double> m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto row = vec_from(j.at(static_cast<std::size_t>(i)));
        if (row.size() != cols) throw Error(ErrorCode::IncompleteManifest, "ragged matrix row");
        m.row(i) = row.transpose();
    }
    return m;
}

void write_model_file(const NetworkModel<double>& model, const fs::path& file) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    write_model(out, model);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
}

NetworkModel<double> read_model_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IncompleteManifest, "model file " + file.string() + " is missing");
    return read_model(in);
}

Candidate master_candidate(const EnsembleRecord& rec) {
    Candidate c;
    c.base_set_id = kMasterSetId;
    c.lag = 0;
    c.recipe = OutputRecipe::Raw;
    c.input_names = rec.master_matrix.input_names;
    c.model = rec.master.best.model;
    c.seed = rec.master.best.seed;
    c.restart = rec.master.best.restart;
    c.epochs = rec.master.best.epochs;
    c.ism = rec.master.best.score.ism;
    c.ep = rec.master.best.score.ep;
    c.forecast_months = rec.master.test_months;
    c.forecasts = rec.master.best.test_predictions;
    c.actual = rec.master.test_actual;
    const auto n = static_cast<Eigen::Index>(c.forecast_months.size());
    c.previous_actual = rec.master_matrix.previous_actual().tail(n);
    c.restart_isms = rec.master.restart_isms;
    return c;
}

std::string label_of(const json& j) { return j.at("label").get<std::string>(); }

}  // namespace

json candidate_to_json(const Candidate& c, const std::string& model_path) {
    json j;
    j["label"] = c.base_set_id == kMasterSetId ? std::string("master") : c.label();
    j["base_set"] = c.base_set_id;
    j["lag"] = c.lag;
    j["recipe"] = c.recipe == OutputRecipe::Raw ? "raw" : "normalized";
    j["inputs"] = c.input_names;
    j["model"] = model_path;
    j["seed"] = c.seed;
    j["restart"] = c.restart;
    j["epochs"] = c.epochs;
    j["ism"] = ism_json(c.ism);
    if (c.ep) {
        j["ep"] = {{"a_t", c.ep->a_t},
                   {"b_t", c.ep->b_t},
                   {"variance", c.ep->variance_hat},
                   {"statistic", c.ep->statistic},
                   {"norm_ep", c.ep->norm_ep}};
    } else {
        j["ep"] = nullptr;
    }
    j["months"] = months_json(c.forecast_months);
    j["forecasts"] = vec_json(c.forecasts);
    j["actual"] = vec_json(c.actual);
    j["previous"] = vec_json(c.previous_actual);
    json isms = json::array();
    for (const auto& s : c.restart_isms) isms.push_back(ism_json(s));
    j["restart_ism"] = std::move(isms);
    return j;
}

Candidate candidate_from_json(const json& j, const fs::path& run_dir) {
    try {
        Candidate c;
        c.base_set_id = j.at("base_set").get<int>();
        c.lag = j.at("lag").get<int>();
        c.recipe = j.at("recipe").get<std::string>() == "normalized" ? OutputRecipe::Normalized : OutputRecipe::Raw;
        c.input_names = j.at("inputs").get<std::vector<std::string>>();
        c.model = read_model_file(run_dir / j.at("model").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        c.restart = j.at("restart").get<int>();
        c.epochs = j.at("epochs").get<int>();
        c.ism = ism_from(j.at("ism"));
        if (!j.at("ep").is_null()) {
            const auto& e = j.at("ep");
            c.ep = EPResult<double>{e.at("a_t").get<double>(), e.at("b_t").get<double>(), e.at("variance").get<double>(),
                                    e.at("statistic").get<double>(), e.at("norm_ep").get<double>()};
        }
        c.forecast_months = months_from(j.at("months"));
        c.forecasts = vec_from(j.at("forecasts"));
        c.actual = vec_from(j.at("actual"));
        c.previous_actual = vec_from(j.at("previous"));
        for (const auto& s : j.at("restart_ism")) c.restart_isms.push_back(ism_from(s));
        const auto n = static_cast<Eigen::Index>(c.forecast_months.size());
        if (c.forecasts.size() != n || c.actual.size() != n || c.previous_actual.size() != n)
            throw Error(ErrorCode::IncompleteManifest, "forecast record lengths differ");
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IncompleteManifest, std::string("candidate record: ") + e.what());
    }
}

json save_candidates(const std::vector<Candidate>& candidates, const fs::path& run_dir) {
    json out = json::array();
    for (const auto& c : candidates) {
        const std::string rel = "models/" + c.label() + ".net";
        write_model_file(c.model, run_dir / rel);
        out.push_back(candidate_to_json(c, rel));
    }
    return out;
}

std::vector<Candidate> load_candidates(const json& array, const fs::path& run_dir) {
    std::vector<Candidate> out;
    for (const auto& j : array) out.push_back(candidate_from_json(j, run_dir));
    return out;
}

fs::path new_run_dir(const PipelineConfig& cfg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    const fs::path root = cfg.resolve(cfg.output_dir);
    const std::string base = std::string(stamp) + "-" + cfg.with_absolute_paths().hash();
    fs::path dir = root / base;
    for (int i = 2; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
    fs::create_directories(dir);
    return dir;
}

void write_json_atomic(const json& j, const fs::path& file) {
    fs::create_directories(file.parent_path());
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << j.dump(2) << '\n';
        if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + tmp.string());
    }
    fs::rename(tmp, file);
}

json read_json(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
}

json build_manifest(const PipelineConfig& cfg, const std::vector<Candidate>& candidates, const Selection& selection,
                    const EnsembleRecord& record, const fs::path& run_dir) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);

    json m;
    m["format"] = "crisk-run";
    m["version"] = 1;
    m["created_utc"] = stamp;
    m["config"] = cfg.with_absolute_paths().serialize();
    m["config_hash"] = cfg.with_absolute_paths().hash();
    m["seeds"] = {{"train", cfg.train.rng_seed}, {"restarts", cfg.train.restarts}};
    m["candidates"] = save_candidates(candidates, run_dir);
    json members = json::array();
    for (const auto& c : record.members) members.push_back(c.label());
    m["members"] = std::move(members);
    m["selection_warning"] = selection.warning ? json(*selection.warning) : json(nullptr);

    const auto master = master_candidate(record);
    write_model_file(master.model, run_dir / "models/master.net");
    m["master"] = candidate_to_json(master, "models/master.net");
    const auto& mm = record.master_matrix;
    m["master_matrix"] = {{"months", months_json(mm.months_out)},
                          {"inputs", matrix_json(mm.inputs)},
                          {"actual", vec_json(mm.actual)},
                          {"trailing", matrix_json(mm.trailing)}};
    return m;
}

Manifest load_manifest(const fs::path& run_dir) {
    const fs::path file = run_dir / "manifest.json";
    if (!fs::exists(file)) throw Error(ErrorCode::IncompleteManifest, file.string() + " does not exist");
    Manifest m{read_json(file), run_dir};
    for (const char* key : {"config", "candidates", "members", "master", "master_matrix"})
        if (!m.json.contains(key)) throw Error(ErrorCode::IncompleteManifest, std::string("manifest lacks '") + key + "'");
    return m;
}

json without_timestamps(json j) {
    j.erase("created_utc");
    return j;
}

EnsembleRecord record_from_manifest(const Manifest& m) {
    EnsembleRecord rec;
    try {
        const auto all = m.json.at("candidates");
        std::map<std::string, const json*> by_label;
        for (const auto& c : all) by_label[label_of(c)] = &c;
        for (const auto& label : m.json.at("members")) {
            const auto it = by_label.find(label.get<std::string>());
            if (it == by_label.end())
                throw Error(ErrorCode::IncompleteManifest, "member " + label.get<std::string>() + " has no candidate record");
            rec.members.push_back(candidate_from_json(*it->second, m.run_dir));
        }
        if (rec.members.empty()) throw Error(ErrorCode::IncompleteManifest, "manifest lists no members");

        const auto master = candidate_from_json(m.json.at("master"), m.run_dir);
        const auto& mj = m.json.at("master_matrix");
        auto& mm = rec.master_matrix;
        mm.base_set_id = kMasterSetId;
        mm.lag = 0;
        mm.recipe = OutputRecipe::Raw;
        mm.input_names = master.input_names;
        mm.months_out = months_from(mj.at("months"));
        mm.inputs = matrix_from(mj.at("inputs"), static_cast<Eigen::Index>(rec.members.size()));
        mm.actual = vec_from(mj.at("actual"));
        mm.output = mm.actual;
        mm.trailing = matrix_from(mj.at("trailing"), 3);

        rec.master.best.restart = master.restart;
        rec.master.best.seed = master.seed;
        rec.master.best.model = master.model;
        rec.master.best.epochs = master.epochs;
        rec.master.best.test_predictions = master.forecasts;
        rec.master.best.score.ism = master.ism;
        rec.master.best.score.ep = master.ep;
        rec.master.test_months = master.forecast_months;
        rec.master.test_actual = master.actual;
        rec.master.test_previous = master.previous_actual.size() ? master.previous_actual(0) : 0.0;
        rec.master.restart_isms = master.restart_isms;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IncompleteManifest, e.what());
    }
    return rec;
}

namespace {

void write_text(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
}

}  // namespace

void write_preprocess_artifacts(const PipelineConfig& cfg, const std::vector<MonthlySeries>& raw,
                                const PreprocessOutput& pre, const fs::path& run_dir) {
    std::ostringstream features;
    write_csv(features, pre.features);
    write_text(run_dir / "features.csv", features.str());
    for (const auto& m : pre.matrices) {
        std::ostringstream csv;
        write_csv(csv, m);
        write_text(run_dir / "matrices" / (m.label() + ".csv"), csv.str());
    }
    for (const auto& s : raw) {
        if (s.name() != kIgaem) continue;
        const auto returns = to_basis_points(log_returns(s)).values();
        std::vector<int> windows;
        for (int w = 50; w <= 80; w += 5) windows.push_back(w);
        const std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        if (returns.size() <= 80) break;
        const auto g = grid_search_var_params(returns, windows, betas, cfg.preprocess.var.confidence);
        std::ostringstream csv;
        csv << "window,beta,eam,outliers,months\n";
        for (std::size_t i = 0; i < windows.size(); ++i)
            for (std::size_t j = 0; j < betas.size(); ++j)
                csv << windows[i] << ',' << betas[j] << ',' << g.eam(i, j) << ',' << g.outliers(i, j) << ','
                    << g.evaluated << '\n';
        write_text(run_dir / "var_grid.csv", csv.str());
    }
}

void write_selection(const Selection& selection, const fs::path& run_dir) {
    json labels = json::array();
    for (const auto& m : selection.members) labels.push_back(m.label());
    write_json_atomic({{"members", labels}, {"warning", selection.warning ? json(*selection.warning) : json(nullptr)}},
                      run_dir / "selection.json");
}

Selection read_selection(const fs::path& run_dir, const std::vector<Candidate>& candidates) {
    const auto j = read_json(run_dir / "selection.json");
    Selection s;
    try {
        for (const auto& label : j.at("members")) {
            const auto it = std::find_if(candidates.begin(), candidates.end(),
                                         [&](const Candidate& c) { return c.label() == label.get<std::string>(); });
            if (it == candidates.end())
                throw Error(ErrorCode::NoCandidates, "selected network " + label.get<std::string>() + " was not trained");
            s.members.push_back(*it);
        }
        if (!j.at("warning").is_null()) s.warning = j.at("warning").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("selection.json: ") + e.what());
    }
    return s;
}

RunResult run_pipeline(const PipelineConfig& cfg, fs::path run_dir, const Progress& progress) {
    in_stage(Stage::Config, [&] { cfg.validate(); });
    const auto raw = in_stage(Stage::Ingest, [&] { return ingest(cfg); });
    if (run_dir.empty()) run_dir = new_run_dir(cfg);
    fs::create_directories(run_dir);
    write_text(run_dir / "config.cfg", cfg.with_absolute_paths().serialize());

    const auto pre = in_stage(Stage::Preprocess, [&] {
        auto out = preprocess_stage(cfg, raw);
        write_preprocess_artifacts(cfg, raw, out, run_dir);
        return out;
    });
    if (progress) progress(std::to_string(pre.matrices.size()) + " training matrices");

    const auto candidates = in_stage(Stage::Train, [&] {
        auto c = train_stage(cfg, pre.matrices, progress);
        write_json_atomic(save_candidates(c, run_dir), run_dir / "candidates.json");
        return c;
    });
    const auto selection = in_stage(Stage::Select, [&] {
        auto s = select_stage(cfg, candidates);
        write_selection(s, run_dir);
        return s;
    });
    if (progress && selection.warning) progress("warning: " + *selection.warning);

    RunResult result;
    result.run_dir = run_dir;
    result.manifest = in_stage(Stage::Master, [&] {
        const auto record = master_stage(cfg, selection, raw);
        auto m = build_manifest(cfg, candidates, selection, record, run_dir);
        write_json_atomic(m, run_dir / "manifest.json");
        return m;
    });
    in_stage(Stage::Report, [&] { write_reports(Manifest{result.manifest, run_dir}, cfg.report_formats); });
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

Prediction predict_from_manifest(const Manifest& manifest, const PipelineConfig& data_cfg) {
    PipelineConfig cfg = PipelineConfig::parse(manifest.json.at("config").get<std::string>());
    cfg.data = data_cfg.data;
    cfg.base_dir = data_cfg.base_dir;
    const auto record = record_from_manifest(manifest);
    const auto raw = ingest(cfg);
    const auto features = derive_features(raw, cfg.preprocess);

    Prediction p;
    p.last_observed = features.last();
    p.target_month = p.last_observed + 1;
    const auto& months = record.master.test_months;
    if (!months.empty() && p.last_observed < months.back())
        throw Error(ErrorCode::StaleModel, "data ends at " + p.last_observed.str() + ", before the model's last month " +
                                               months.back().str());
    const auto target = features.column(kEmbiVe);
    const Eigen::Index last_row = features.rows() - 1;
    if (last_row < 2) throw Error(ErrorCode::StaleModel, "need three observed months of the target");
    p.last_actual = target(last_row);

    p.member_forecasts.resize(static_cast<Eigen::Index>(record.members.size()));
    for (std::size_t k = 0; k < record.members.size(); ++k) {
        const auto& mem = record.members[k];
        if (mem.lag < 1) throw Error(ErrorCode::StaleModel, mem.label() + " has no forecast horizon");
        const YearMonth input_month = p.target_month - mem.lag;
        if (input_month < features.start())
            throw Error(ErrorCode::StaleModel, mem.label() + " needs inputs from " + input_month.str());
        const Eigen::Index row = input_month - features.start();
        Vector<double> x(static_cast<Eigen::Index>(mem.input_names.size()));
        for (std::size_t c = 0; c < mem.input_names.size(); ++c)
            x(static_cast<Eigen::Index>(c)) = features.column(mem.input_names[c])(row);
        double y = forward(mem.model, x);
        if (mem.recipe == OutputRecipe::Normalized)
            y = denormalize_output(y, {target(last_row - 2), target(last_row - 1), target(last_row)});
        p.member_forecasts(static_cast<Eigen::Index>(k)) = y;
        p.member_labels.push_back(mem.label());
    }
    p.forecast = predict_next(record, p.member_forecasts, p.last_actual);
    return p;
}

}  // namespace crisk
