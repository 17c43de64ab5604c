#include "crisk/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace crisk {

namespace fs = std::filesystem;

std::vector<GroupSummary> summarize_by(const std::vector<Candidate>& candidates,
                                       const std::function<int(const Candidate&)>& key) {
    struct Acc {
        GroupSummary g;
        double ism_sum = 0.0;
        double ep_sum = 0.0;
    };
    std::map<int, Acc> groups;
    for (const auto& c : candidates) {
        auto& a = groups[key(c)];
        a.g.key = key(c);
        ++a.g.networks;
        if (c.ism.is_perfect()) {
            ++a.g.perfect;
        } else {
            ++a.g.finite;
            a.ism_sum += c.ism.value();
        }
        if (c.ep) {
            ++a.g.ep_defined;
            a.ep_sum += c.ep->norm_ep;
        }
    }
    std::vector<GroupSummary> out;
    for (auto& [k, a] : groups) {
        if (a.g.finite) a.g.mean_ism = a.ism_sum / a.g.finite;
        if (a.g.ep_defined) a.g.mean_norm_ep = a.ep_sum / a.g.ep_defined;
        out.push_back(a.g);
    }
    return out;
}

std::vector<DivergenceRow> divergence_by_date(const std::vector<Candidate>& members, const TrainingMatrix& master_matrix) {
    if (members.empty()) throw Error(ErrorCode::EmptyEnsemble, "no members");
    if (master_matrix.inputs.cols() != static_cast<Eigen::Index>(members.size()))
        throw Error(ErrorCode::DimensionMismatch, "master matrix width differs from the member count");
    const Eigen::Index dates = master_matrix.rows();
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> votes(master_matrix.inputs.cols(), dates);
    for (Eigen::Index d = 0; d < dates; ++d)
        for (Eigen::Index j = 0; j < votes.rows(); ++j)
            votes(j, d) = position_from_forecast(master_matrix.inputs(d, j), master_matrix.trailing(d, 2)) > 0;
    const auto pct = divergence_percentage(votes);
    std::vector<DivergenceRow> rows;
    for (Eigen::Index d = 0; d < dates; ++d)
        rows.push_back({master_matrix.months_out[static_cast<std::size_t>(d)], static_cast<int>(votes.col(d).count()),
                        static_cast<int>(votes.rows()), pct(d)});
    return rows;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string ism_text(const SharpeIndex<double>& s) { return s.is_perfect() ? std::string("perfect") : num(s.value()); }

/// Rescores a stored forecast record and checks it against the stored score.
ForecastScore rescore(const Candidate& c) {
    const auto s = score_forecasts(c.forecasts, c.actual, c.previous_actual(0));
    const bool same_ism = s.ism.is_perfect() == c.ism.is_perfect() && (s.ism.is_perfect() || s.ism.value() == c.ism.value());
    const bool same_ep = s.ep.has_value() == c.ep.has_value() && (!s.ep || s.ep->norm_ep == c.ep->norm_ep);
    if (!same_ism || !same_ep)
        throw Error(ErrorCode::IncompleteManifest, c.label() + ": stored score does not match its forecasts");
    return s;
}

void write_file(const fs::path& file, const std::string& text, std::vector<fs::path>& written) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
    written.push_back(file);
}

std::string groups_csv(const char* key_name, const std::vector<GroupSummary>& groups) {
    std::ostringstream o;
    o << key_name << ",networks,finite_ism,perfect_ism,mean_ism,ep_defined,mean_norm_ep\n";
    for (const auto& g : groups)
        o << g.key << ',' << g.networks << ',' << g.finite << ',' << g.perfect << ',' << opt(g.mean_ism) << ','
          << g.ep_defined << ',' << opt(g.mean_norm_ep) << '\n';
    return o.str();
}

std::string groups_table(const char* title, const char* key_name, const std::vector<GroupSummary>& groups) {
    std::ostringstream o;
    char line[160];
    o << title << '\n';
    std::snprintf(line, sizeof line, "  %-8s %8s %8s %12s %14s\n", key_name, "networks", "perfect", "mean ISM", "mean norm_EP");
    o << line;
    for (const auto& g : groups) {
        std::snprintf(line, sizeof line, "  %-8d %8d %8d %12s %14s\n", g.key, g.networks, g.perfect,
                      g.mean_ism ? num(*g.mean_ism).c_str() : "-", g.mean_norm_ep ? num(*g.mean_norm_ep).c_str() : "-");
        o << line;
    }
    return o.str();
}

}  // namespace

std::vector<fs::path> write_reports(const Manifest& manifest, const std::vector<std::string>& formats) {
    const bool csv = std::find(formats.begin(), formats.end(), "csv") != formats.end();
    const bool txt = std::find(formats.begin(), formats.end(), "txt") != formats.end();
    const auto record = record_from_manifest(manifest);
    std::vector<Candidate> all;
    try {
        all = load_candidates(manifest.json.at("candidates"), manifest.run_dir);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IncompleteManifest, e.what());
    }
    const fs::path dir = manifest.run_dir / "reports";
    std::vector<fs::path> written;

    const auto divergence = divergence_by_date(record.members, record.master_matrix);
    for (const auto& c : all) rescore(c);
    const auto by_set = summarize_by(all, [](const Candidate& c) { return c.base_set_id; });
    const auto by_lag = summarize_by(all, [](const Candidate& c) { return c.lag; });

    Candidate master;
    master.base_set_id = kMasterSetId;
    master.forecast_months = record.master.test_months;
    master.forecasts = record.master.best.test_predictions;
    master.actual = record.master.test_actual;
    master.previous_actual = Vector<double>::Constant(1, record.master.test_previous);
    master.ism = record.master.best.score.ism;
    master.ep = record.master.best.score.ep;

    std::vector<std::pair<std::string, const Candidate*>> curves;
    for (const auto& m : record.members) curves.emplace_back(m.label(), &m);
    curves.emplace_back("master", &master);

    std::ostringstream summary;
    if (csv) {
        std::ostringstream d;
        d << "month,members_up,members,percent_up\n";
        for (const auto& r : divergence) d << r.month.str() << ',' << r.up << ',' << r.members << ',' << num(r.percent_up) << '\n';
        write_file(dir / "divergence.csv", d.str(), written);
        write_file(dir / "base_sets.csv", groups_csv("base_set", by_set), written);
        write_file(dir / "lags.csv", groups_csv("lag", by_lag), written);
    }
    summary << "Ensemble members (best first)\n";
    char line[200];
    std::snprintf(line, sizeof line, "  %-12s %14s %12s %10s\n", "network", "ISM", "norm_EP", "hit rate");
    summary << line;
    for (const auto& [label, c] : curves) {
        const auto s = rescore(*c);
        if (csv) {
            std::ostringstream o;
            o << "month,actual,forecast,position,eq,pe\n";
            for (Eigen::Index t = 0; t < s.report.eq.size(); ++t)
                o << c->forecast_months[static_cast<std::size_t>(t)].str() << ',' << num(c->actual(t)) << ','
                  << num(c->forecasts(t)) << ',' << s.report.positions(t) << ',' << num(s.report.eq(t)) << ','
                  << num(s.report.pe(t)) << '\n';
            write_file(dir / "curves" / (label + ".csv"), o.str(), written);
        }
        std::snprintf(line, sizeof line, "  %-12s %14s %12s %10s\n", label.c_str(), ism_text(s.ism).c_str(),
                      s.ep ? num(s.ep->norm_ep).c_str() : "-", num(s.directional_accuracy).c_str());
        summary << line;
    }
    if (txt) {
        summary << '\n' << groups_table("By base set", "set", by_set) << '\n' << groups_table("By lag", "lag", by_lag);
        summary << "\nDivergence by date (percent of members calling a rise)\n";
        for (const auto& r : divergence) {
            std::snprintf(line, sizeof line, "  %s %3d/%-3d %6.1f%%\n", r.month.str().c_str(), r.up, r.members, r.percent_up);
            summary << line;
        }
        write_file(dir / "summary.txt", summary.str(), written);
    }
    return written;
}

}  // namespace crisk
