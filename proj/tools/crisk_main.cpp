// crisk: command-line driver for the spread forecasting pipeline.

#include "crisk/pipeline.hpp"
#include "crisk/synthetic.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace crisk;

namespace {

struct Options {
    std::string config;
    std::string run_dir;
    std::vector<std::string> overrides;
    bool full_scale = false;
    bool quiet = false;
};

PipelineConfig resolve_config(const Options& o) {
    return in_stage(Stage::Config, [&] {
        PipelineConfig cfg;
        if (!o.config.empty()) {
            cfg = PipelineConfig::load(o.config);
        } else if (!o.run_dir.empty() && fs::exists(fs::path(o.run_dir) / "config.cfg")) {
            cfg = PipelineConfig::load(fs::path(o.run_dir) / "config.cfg");
        } else {
            throw Error(ErrorCode::InvalidConfig, "pass --config, or --run-dir of a run that has config.cfg");
        }
        for (const auto& kv : o.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (o.full_scale) cfg.use_full_scale();
        cfg.validate();
        return cfg;
    });
}

fs::path existing_run_dir(const Options& o) {
    if (o.run_dir.empty()) throw StageError(Stage::Config, Error(ErrorCode::InvalidConfig, "--run-dir is required"));
    if (!fs::is_directory(o.run_dir))
        throw StageError(Stage::Config, Error(ErrorCode::MissingFile, o.run_dir + " is not a directory"));
    return o.run_dir;
}

fs::path run_dir_for(const Options& o, const PipelineConfig& cfg) {
    fs::path dir = o.run_dir.empty() ? new_run_dir(cfg) : fs::path(o.run_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.cfg", std::ios::binary) << cfg.with_absolute_paths().serialize();
    return dir;
}

Progress progress_for(const Options& o) {
    if (o.quiet) return {};
    return [](const std::string& msg) { std::cerr << "  " << msg << '\n'; };
}

std::vector<TrainingMatrix> matrices_for(const PipelineConfig& cfg, const std::vector<MonthlySeries>& raw) {
    return in_stage(Stage::Preprocess, [&] { return preprocess_stage(cfg, raw).matrices; });
}

void print_prediction(const Prediction& p) {
    std::printf("last observed %s: %.6g\n", p.last_observed.str().c_str(), p.last_actual);
    for (std::size_t i = 0; i < p.member_labels.size(); ++i)
        std::printf("  %-12s %.6g\n", p.member_labels[i].c_str(), p.member_forecasts(static_cast<Eigen::Index>(i)));
    std::printf("forecast %s: %.6g (%s)\n", p.target_month.str().c_str(), p.forecast.value,
                p.forecast.direction > 0 ? "rise" : "fall");
    std::printf("members calling a rise: %d of %d\n", p.forecast.members_up, p.forecast.members);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Country-risk spread forecasting: VaR features, neural ensembles, trading-style scores"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "pipeline config file");
        sub->add_option("-r,--run-dir", o.run_dir, "run directory");
        sub->add_option("-s,--set", o.overrides, "override a config key (key=value)")->allow_extra_args(false);
        sub->add_flag("--full-scale", o.full_scale, "train 5000 restarts per matrix");
        sub->add_flag("-q,--quiet", o.quiet, "no progress output");
    };

    auto* validate = app.add_subcommand("validate", "check the config and data files");
    auto* preprocess = app.add_subcommand("preprocess", "write features and training matrices");
    auto* train = app.add_subcommand("train", "train every base-set matrix");
    auto* select = app.add_subcommand("select", "pick the ensemble members");
    auto* master = app.add_subcommand("master", "train the master network and write the manifest");
    auto* report = app.add_subcommand("report", "write report files from a manifest");
    auto* predict = app.add_subcommand("predict", "forecast the month after the latest data");
    auto* run = app.add_subcommand("run", "every stage from ingest to reports");
    for (auto* sub : {validate, preprocess, train, select, master, report, predict, run}) add_common(sub);

    auto* demo = app.add_subcommand("demo-data", "write a synthetic dataset and a config for it");
    std::string demo_out = "demo";
    std::uint64_t demo_seed = SyntheticOptions{}.seed;
    demo->add_option("-o,--out", demo_out, "output directory");
    demo->add_option("--seed", demo_seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo->parsed()) {
            SyntheticOptions opt;
            opt.seed = demo_seed;
            const auto data = make_synthetic_dataset(opt);
            const fs::path dir(demo_out);
            write_dataset_csv({data[0]}, dir / "indicator.csv");
            write_dataset_csv({data[1], data[2], data[3]}, dir / "markets.csv");
            std::ofstream cfg(dir / "demo.cfg", std::ios::binary);
            cfg << "data.igaem.file = indicator.csv\n"
                << "data.embi_ve.file = markets.csv\n"
                << "data.embi_global.file = markets.csv\n"
                << "data.tbill.file = markets.csv\n"
                << "output.dir = runs\n";
            std::printf("wrote %s\n", (dir / "demo.cfg").string().c_str());
            return 0;
        }

        if (validate->parsed()) {
            const auto cfg = resolve_config(o);
            const auto raw = in_stage(Stage::Ingest, [&] { return ingest(cfg); });
            for (const auto& s : raw)
                std::printf("%-12s %s..%s  %ld months\n", s.name().c_str(), s.start().str().c_str(), s.last().str().c_str(),
                            static_cast<long>(s.size()));
            const auto pre = in_stage(Stage::Preprocess, [&] { return preprocess_stage(cfg, raw); });
            std::printf("features %s..%s, %zu training matrices\n", pre.features.start().str().c_str(),
                        pre.features.last().str().c_str(), pre.matrices.size());
            std::printf("config hash %s\n", cfg.with_absolute_paths().hash().c_str());
            return 0;
        }

        if (run->parsed()) {
            const auto cfg = resolve_config(o);
            const auto result = run_pipeline(cfg, o.run_dir, progress_for(o));
            std::printf("%s\n", result.run_dir.string().c_str());
            return 0;
        }

        if (preprocess->parsed()) {
            const auto cfg = resolve_config(o);
            const auto raw = in_stage(Stage::Ingest, [&] { return ingest(cfg); });
            const auto dir = run_dir_for(o, cfg);
            in_stage(Stage::Preprocess, [&] { write_preprocess_artifacts(cfg, raw, preprocess_stage(cfg, raw), dir); });
            std::printf("%s\n", dir.string().c_str());
            return 0;
        }

        if (train->parsed()) {
            const auto cfg = resolve_config(o);
            const auto raw = in_stage(Stage::Ingest, [&] { return ingest(cfg); });
            const auto matrices = matrices_for(cfg, raw);
            const auto dir = run_dir_for(o, cfg);
            in_stage(Stage::Train, [&] {
                const auto candidates = train_stage(cfg, matrices, progress_for(o));
                write_json_atomic(save_candidates(candidates, dir), dir / "candidates.json");
            });
            std::printf("%s\n", dir.string().c_str());
            return 0;
        }

        if (select->parsed()) {
            const auto dir = existing_run_dir(o);
            const auto cfg = resolve_config(o);
            in_stage(Stage::Select, [&] {
                const auto candidates = load_candidates(read_json(dir / "candidates.json"), dir);
                const auto s = select_stage(cfg, candidates);
                write_selection(s, dir);
                if (s.warning) std::fprintf(stderr, "warning: %s\n", s.warning->c_str());
                for (const auto& m : s.members) std::printf("%s\n", m.label().c_str());
            });
            return 0;
        }

        if (master->parsed()) {
            const auto dir = existing_run_dir(o);
            const auto cfg = resolve_config(o);
            const auto raw = in_stage(Stage::Ingest, [&] { return ingest(cfg); });
            in_stage(Stage::Master, [&] {
                const auto candidates = load_candidates(read_json(dir / "candidates.json"), dir);
                const auto selection = read_selection(dir, candidates);
                const auto record = master_stage(cfg, selection, raw);
                write_json_atomic(build_manifest(cfg, candidates, selection, record, dir), dir / "manifest.json");
            });
            std::printf("%s\n", (dir / "manifest.json").string().c_str());
            return 0;
        }

        if (report->parsed()) {
            const auto dir = existing_run_dir(o);
            const auto cfg = resolve_config(o);
            in_stage(Stage::Report, [&] {
                for (const auto& f : write_reports(load_manifest(dir), cfg.report_formats))
                    std::printf("%s\n", f.string().c_str());
            });
            return 0;
        }

        if (predict->parsed()) {
            const auto dir = existing_run_dir(o);
            const auto cfg = resolve_config(o);
            in_stage(Stage::Predict, [&] { print_prediction(predict_from_manifest(load_manifest(dir), cfg)); });
            return 0;
        }
    } catch (const StageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 9;
    }
    return 0;
}
