#include "crisk/pipeline.hpp"
#include "crisk/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

using namespace crisk;
namespace fs = std::filesystem;
using nlohmann::json;

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

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("crisk_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Demo data cut at `last`, with a config that trains quickly.
fs::path write_dataset(const fs::path& dir, YearMonth last) {
    SyntheticOptions opt;
    opt.end = YearMonth(2010, 6);
    auto data = make_synthetic_dataset(opt);
    for (auto& s : data) s = s.slice(s.start(), last);
    write_dataset_csv({data[0]}, dir / "indicator.csv");
    write_dataset_csv({data[1], data[2], data[3]}, dir / "markets.csv");
    std::ofstream(dir / "run.cfg") << "data.igaem.file = indicator.csv\n"
                                      "data.embi_ve.file = markets.csv\n"
                                      "data.embi_global.file = markets.csv\n"
                                      "data.tbill.file = markets.csv\n"
                                      "train.restarts = 2\n"
                                      "train.cycles = 100\n"
                                      "output.dir = runs\n";
    return dir / "run.cfg";
}

const YearMonth kLast(2009, 12);

struct TinyRun {
    fs::path data_dir;
    PipelineConfig cfg;
    RunResult result;
};

const TinyRun& tiny_run() {
    static const TinyRun run = [] {
        TinyRun r;
        r.data_dir = scratch("tiny");
        r.cfg = PipelineConfig::load(write_dataset(r.data_dir, kLast));
        r.result = run_pipeline(r.cfg, r.data_dir / "run");
        return r;
    }();
    return run;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
    std::ifstream in(file);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("config text round trips") {
    PipelineConfig a;
    CHECK(PipelineConfig::parse(a.serialize()) == a);

    const auto b = PipelineConfig::parse(
        "# comment\n"
        "data.igaem.file = ind.csv\n"
        "data.igaem.column = IGAEM\n"
        "var.window = 60\n"
        "var.confidence = 0.99\n"
        "smoothing.beta = 0.3\n"
        "smoothing.seed = 12.5\n"
        "ba.level1 = 2:1,4:2\n"
        "basesets.enabled = 1,7,9\n"
        "basesets.max_lag = 6\n"
        "train.hidden = 4,3\n"
        "train.split = 0.65\n"
        "train.restarts = 7\n"
        "ensemble.members = 5\n"
        "report.formats = txt\n");
    CHECK(b.data.at("igaem").column == "IGAEM");
    CHECK(b.preprocess.var.window == 60);
    CHECK(b.train.hidden_layers == std::vector<int>{4, 3});
    CHECK(b.preprocess.enabled_sets == std::vector<int>{1, 7, 9});
    const auto again = PipelineConfig::parse(b.serialize());
    CHECK(again == b);
    CHECK(again.serialize() == b.serialize());
    CHECK(again.hash() == b.hash());
    CHECK(a.hash() != b.hash());

    auto threads = b;
    threads.train.threads = 4;
    CHECK(threads.hash() == b.hash());

    CHECK(a.train.restarts == kDefaultRestarts);
    a.use_full_scale();
    CHECK(a.train.restarts == kFullScaleRestarts);

    CHECK(code_of([] { PipelineConfig::parse("train.speed = 3\n"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { PipelineConfig::parse("var.window = many\n"); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { PipelineConfig::parse("just words\n"); }) == ErrorCode::ParseError);
    CHECK(code_of([] { PipelineConfig::parse("train.split = 0.9\n").validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("a missing CSV halts at ingest") {
    const auto dir = scratch("missing");
    std::ofstream(dir / "markets.csv") << "date,embi_ve,embi_global,tbill\n";
    auto cfg = PipelineConfig::parse("data.igaem.file = nowhere.csv\n"
                                     "data.embi_ve.file = markets.csv\n"
                                     "data.embi_global.file = markets.csv\n"
                                     "data.tbill.file = markets.csv\n",
                                     dir);
    try {
        run_pipeline(cfg, dir / "run");
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == Stage::Ingest);
        CHECK(e.code() == ErrorCode::MissingFile);
        CHECK(e.exit_code() == 2);
    }
}

TEST_CASE("a run writes every artifact and a loadable manifest") {
    const auto& run = tiny_run();
    const auto dir = run.result.run_dir;
    for (const char* f : {"config.cfg", "features.csv", "candidates.json", "selection.json", "manifest.json",
                          "reports/divergence.csv", "reports/base_sets.csv", "reports/lags.csv", "reports/summary.txt",
                          "reports/curves/master.csv", "models/master.net"})
        CHECK_MESSAGE(fs::exists(dir / f), f);

    const auto m = load_manifest(dir);
    CHECK(m.json == run.result.manifest);
    CHECK(m.json.at("format") == "crisk-run");
    CHECK(m.json.at("config_hash") == run.cfg.with_absolute_paths().hash());
    const auto rec = record_from_manifest(m);
    REQUIRE(rec.members.size() == 10);
    CHECK(rec.master_matrix.inputs.cols() == 10);
    CHECK(rec.master.best.model.input_count() == 10);
    for (std::size_t i = 0; i < rec.members.size(); ++i) {
        CHECK(rec.members[i].label() == m.json.at("members")[i].get<std::string>());
        if (i > 0) CHECK_FALSE(rec.members[i].ism > rec.members[i - 1].ism);
        // stored forecasts come from the stored model
        const auto& mem = rec.members[i];
        CHECK(mem.forecasts.size() == static_cast<Eigen::Index>(mem.forecast_months.size()));
    }
    CHECK(fs::exists(dir / m.json.at("master").at("model").get<std::string>()));

    // the stored master forecasts are the stored master model applied to the stored matrix
    const auto& mm = rec.master_matrix;
    const auto n_test = rec.master.best.test_predictions.size();
    for (Eigen::Index i = 0; i < n_test; ++i) {
        const Eigen::Index row = mm.rows() - n_test + i;
        CHECK(forward(rec.master.best.model, mm.inputs.row(row).transpose()) == rec.master.best.test_predictions(i));
    }
}

TEST_CASE("report numbers are recomputable from the manifest") {
    const auto& run = tiny_run();
    const auto& j = run.result.manifest;
    const auto dir = run.result.run_dir / "reports";

    // group means by base set, straight from the JSON
    std::map<int, std::vector<double>> isms, eps;
    std::map<int, int> counts;
    for (const auto& c : j.at("candidates")) {
        const int set = c.at("base_set").get<int>();
        ++counts[set];
        if (c.at("ism").is_number()) isms[set].push_back(c.at("ism").get<double>());
        if (!c.at("ep").is_null()) eps[set].push_back(c.at("ep").at("norm_ep").get<double>());
    }
    const auto rows = read_csv(dir / "base_sets.csv");
    REQUIRE(rows.size() == counts.size() + 1);
    int total = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const int set = std::stoi(rows[r][0]);
        CHECK(std::stoi(rows[r][1]) == counts[set]);
        total += counts[set];
        double s = 0;
        for (double v : isms[set]) s += v;
        if (!isms[set].empty()) CHECK(std::stod(rows[r][4]) == doctest::Approx(s / isms[set].size()).epsilon(1e-9));
        s = 0;
        for (double v : eps[set]) s += v;
        if (!eps[set].empty()) CHECK(std::stod(rows[r][6]) == doctest::Approx(s / eps[set].size()).epsilon(1e-9));
    }
    CHECK(total == static_cast<int>(j.at("candidates").size()));

    // lag groups partition the candidates
    int lag_total = 0;
    const auto lag_rows = read_csv(dir / "lags.csv");
    for (std::size_t r = 1; r < lag_rows.size(); ++r) lag_total += std::stoi(lag_rows[r][1]);
    CHECK(lag_total == total);

    // divergence: share of members whose forecast is at or above the previous actual
    const auto& mj = j.at("master_matrix");
    const auto div = read_csv(dir / "divergence.csv");
    REQUIRE(div.size() == mj.at("months").size() + 1);
    for (std::size_t d = 0; d < mj.at("months").size(); ++d) {
        const double prev = mj.at("trailing")[d][2].get<double>();
        int up = 0;
        for (const auto& v : mj.at("inputs")[d]) up += v.get<double>() >= prev;
        CHECK(div[d + 1][0] == mj.at("months")[d].get<std::string>());
        CHECK(std::stoi(div[d + 1][1]) == up);
        CHECK(std::stod(div[d + 1][3]) == doctest::Approx(100.0 * up / 10.0));
    }
}

TEST_CASE("summarize_by groups are exhaustive and disjoint") {
    std::vector<Candidate> cands;
    for (int set = 1; set <= 4; ++set)
        for (int lag = 1; lag <= set; ++lag) {
            Candidate c;
            c.base_set_id = set;
            c.lag = lag;
            c.ism = lag == 3 ? SharpeIndex<double>::perfect() : SharpeIndex<double>::finite(set * 10 + lag);
            cands.push_back(c);
        }
    const auto by_lag = summarize_by(cands, [](const Candidate& c) { return c.lag; });
    int total = 0;
    for (const auto& g : by_lag) {
        total += g.networks;
        CHECK(g.networks == g.finite + g.perfect);
        CHECK(g.networks == 5 - g.key);
    }
    CHECK(total == static_cast<int>(cands.size()));
    CHECK(by_lag[0].mean_ism == doctest::Approx((11 + 21 + 31 + 41) / 4.0));
    CHECK(by_lag[2].perfect == 2);
    CHECK_FALSE(by_lag[2].mean_ism);
    CHECK_FALSE(by_lag[0].mean_norm_ep);
}

TEST_CASE("tampered or partial manifests are rejected") {
    const auto& run = tiny_run();
    const auto copy = scratch("tampered");
    fs::copy(run.result.run_dir, copy, fs::copy_options::recursive);

    auto j = run.result.manifest;
    auto& first = j.at("candidates")[0];
    first["ism"] = first.at("ism").is_number() ? json(first.at("ism").get<double>() + 1.0) : json(3.0);
    write_json_atomic(j, copy / "manifest.json");
    CHECK(code_of([&] { write_reports(load_manifest(copy), {"csv"}); }) == ErrorCode::IncompleteManifest);

    j = run.result.manifest;
    j.erase("master_matrix");
    write_json_atomic(j, copy / "manifest.json");
    CHECK(code_of([&] { load_manifest(copy); }) == ErrorCode::IncompleteManifest);

    fs::remove(copy / "manifest.json");
    CHECK(code_of([&] { load_manifest(copy); }) == ErrorCode::IncompleteManifest);

    write_json_atomic(run.result.manifest, copy / "manifest.json");
    fs::remove(copy / "models/master.net");
    CHECK(code_of([&] { record_from_manifest(load_manifest(copy)); }) == ErrorCode::IncompleteManifest);
}

TEST_CASE("predict agrees with matrices built once the next month is known") {
    const auto& run = tiny_run();
    const auto m = load_manifest(run.result.run_dir);
    const auto p = predict_from_manifest(m, run.cfg);
    CHECK(p.last_observed == kLast);
    CHECK(p.target_month == kLast + 1);

    // one more month of data: each member's matrix gains a row whose output month is the target
    const auto next_dir = scratch("next");
    const auto next_cfg = PipelineConfig::load(write_dataset(next_dir, kLast + 1));
    const auto raw = ingest(next_cfg);
    const auto matrices = assemble_base_sets(raw, run.cfg.preprocess);
    const auto rec = record_from_manifest(m);
    REQUIRE(p.member_forecasts.size() == static_cast<Eigen::Index>(rec.members.size()));
    for (std::size_t k = 0; k < rec.members.size(); ++k) {
        const auto& mem = rec.members[k];
        const auto it = std::find_if(matrices.begin(), matrices.end(), [&](const TrainingMatrix& t) {
            return t.base_set_id == mem.base_set_id && t.lag == mem.lag;
        });
        REQUIRE(it != matrices.end());
        const Eigen::Index row = it->rows() - 1;
        REQUIRE(it->months_out.back() == p.target_month);
        const double expected = it->to_level(row, forward(mem.model, it->inputs.row(row).transpose()));
        CHECK(p.member_forecasts(static_cast<Eigen::Index>(k)) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(p.forecast.value == forward(rec.master.best.model, p.member_forecasts));
    CHECK(p.last_actual == *raw[1].at(kLast));
}

TEST_CASE("predict refuses data older than the model") {
    const auto& run = tiny_run();
    const auto old_dir = scratch("old");
    const auto old_cfg = PipelineConfig::load(write_dataset(old_dir, YearMonth(2008, 6)));
    CHECK(code_of([&] { predict_from_manifest(load_manifest(run.result.run_dir), old_cfg); }) == ErrorCode::StaleModel);
}

TEST_CASE("identical configs give identical manifests") {
    const auto& run = tiny_run();
    const auto second = run_pipeline(run.cfg, run.data_dir / "run2");
    CHECK(without_timestamps(second.manifest) == without_timestamps(run.result.manifest));
}
