#include "crisk/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace crisk {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        auto comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

std::optional<YearMonth> YearMonth::parse(std::string_view text) {
    text = trim(text);
    if (text.size() != 7 || text[4] != '-') return std::nullopt;
    int year = 0, month = 0;
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 4, year);
    auto [p2, e2] = std::from_chars(text.data() + 5, text.data() + 7, month);
    if (e1 != std::errc() || p1 != text.data() + 4 || e2 != std::errc() || p2 != text.data() + 7) return std::nullopt;
    if (month < 1 || month > 12) return std::nullopt;
    return YearMonth(year, month);
}

std::string YearMonth::str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
    return buf;
}

std::ostream& operator<<(std::ostream& os, YearMonth ym) { return os << ym.str(); }

MonthlySeries::MonthlySeries(std::string name, YearMonth start, Vector<double> values)
    : name_(std::move(name)), start_(start), values_(std::move(values)) {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_(i)))
            throw Error(ErrorCode::UnparseableValue, name_ + ": non-finite value at " + month(i).str());
    }
}

MonthlySeries MonthlySeries::from_observations(std::string name,
                                               const std::vector<std::pair<YearMonth, double>>& obs) {
    Vector<double> values(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (i > 0) {
            const int step = obs[i].first - obs[i - 1].first;
            if (step == 0)
                throw RowError(ErrorCode::DuplicateDate, i + 1, name + ": duplicate month " + obs[i].first.str());
            if (step < 0)
                throw RowError(ErrorCode::UnorderedDates, i + 1, name + ": month " + obs[i].first.str() + " out of order");
            if (step > 1)
                throw RowError(ErrorCode::GapInDates, i + 1,
                               name + ": gap between " + obs[i - 1].first.str() + " and " + obs[i].first.str());
        }
        values(static_cast<Eigen::Index>(i)) = obs[i].second;
    }
    return MonthlySeries(std::move(name), obs.empty() ? YearMonth{} : obs.front().first, std::move(values));
}

std::optional<double> MonthlySeries::at(YearMonth m) const {
    if (!covers(m)) return std::nullopt;
    return values_(m - start_);
}

MonthlySeries MonthlySeries::slice(YearMonth from, YearMonth to) const {
    if (!covers(from) || !covers(to) || to < from)
        throw Error(ErrorCode::IndexOutOfRange, name_ + ": slice " + from.str() + ".." + to.str() + " outside series");
    return MonthlySeries(name_, from, values_.segment(from - start_, (to - from) + 1));
}

MonthlySeries MonthlySeries::renamed(std::string name) const { return MonthlySeries(std::move(name), start_, values_); }

MonthlySeries MonthlySeries::shifted(int months) const { return MonthlySeries(name_, start_ + months, values_); }

AlignedFrame::AlignedFrame(YearMonth start, std::vector<std::string> names, Matrix<double> data)
    : start_(start), names_(std::move(names)), data_(std::move(data)) {
    if (static_cast<Eigen::Index>(names_.size()) != data_.cols())
        throw Error(ErrorCode::LengthMismatch, "frame column names do not match data width");
}

bool AlignedFrame::has(std::string_view name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Eigen::Index AlignedFrame::index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error(ErrorCode::MissingColumn, "frame has no column '" + std::string(name) + "'");
    return it - names_.begin();
}

MonthlySeries AlignedFrame::series(std::string_view name) const {
    return MonthlySeries(std::string(name), start_, data_.col(index_of(name)));
}

std::vector<MonthlySeries> AlignedFrame::to_series() const {
    std::vector<MonthlySeries> out;
    out.reserve(names_.size());
    for (const auto& n : names_) out.push_back(series(n));
    return out;
}

std::vector<MonthlySeries> load_series(const std::filesystem::path& path, const std::vector<ColumnSpec>& columns) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    return load_series(in, columns);
}

std::vector<MonthlySeries> load_series(std::istream& in, const std::vector<ColumnSpec>& columns) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "empty CSV: header row required");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    const auto header = split_fields(line);
    std::size_t date_col = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "date" || header[i] == "month") {
            date_col = i;
            break;
        }
    }
    std::vector<std::size_t> value_cols;
    for (const auto& spec : columns) {
        auto it = std::find(header.begin(), header.end(), spec.column);
        if (it == header.end()) throw Error(ErrorCode::MissingColumn, "CSV has no column '" + spec.column + "'");
        value_cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }

    std::vector<std::vector<std::pair<YearMonth, double>>> obs(columns.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() < header.size())
            throw RowError(ErrorCode::UnparseableValue, row, "expected " + std::to_string(header.size()) + " fields");
        auto month = YearMonth::parse(fields[date_col]);
        if (!month) throw RowError(ErrorCode::UnparseableValue, row, "bad date '" + std::string(fields[date_col]) + "'");
        for (std::size_t c = 0; c < columns.size(); ++c) {
            auto v = parse_double(fields[value_cols[c]]);
            if (!v)
                throw RowError(ErrorCode::UnparseableValue, row,
                               columns[c].column + " = '" + std::string(fields[value_cols[c]]) + "'");
            obs[c].emplace_back(*month, *v);
        }
    }

    std::vector<MonthlySeries> out;
    for (std::size_t c = 0; c < columns.size(); ++c) out.push_back(MonthlySeries::from_observations(columns[c].name, obs[c]));
    return out;
}

AlignedFrame align(const std::vector<MonthlySeries>& series) {
    if (series.empty()) throw Error(ErrorCode::EmptyIntersection, "no series to align");
    YearMonth from = series.front().start();
    YearMonth to = series.front().last();
    for (const auto& s : series) {
        if (s.empty()) throw Error(ErrorCode::EmptyIntersection, s.name() + " is empty");
        from = std::max(from, s.start());
        to = std::min(to, s.last());
    }
    if (to < from) throw Error(ErrorCode::EmptyIntersection, "series month ranges do not overlap");

    const Eigen::Index rows = (to - from) + 1;
    Matrix<double> data(rows, static_cast<Eigen::Index>(series.size()));
    std::vector<std::string> names;
    for (std::size_t j = 0; j < series.size(); ++j) {
        data.col(static_cast<Eigen::Index>(j)) = series[j].values().segment(from - series[j].start(), rows);
        names.push_back(series[j].name());
    }
    return AlignedFrame(from, std::move(names), std::move(data));
}

MonthlySeries log_returns(const MonthlySeries& s) {
    if (s.size() < 2) throw Error(ErrorCode::InsufficientHistory, s.name() + ": log returns need two observations");
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!(s[i] > 0.0))
            throw Error(ErrorCode::NonPositiveValue, s.name() + ": value at " + s.month(i).str() + " is not positive");
    const auto& v = s.values();
    const Eigen::Index n = v.size() - 1;
    Vector<double> r = (v.tail(n).array() / v.head(n).array()).log();
    return MonthlySeries(s.name(), s.start() + 1, std::move(r));
}

MonthlySeries to_basis_points(const MonthlySeries& r) { return MonthlySeries(r.name(), r.start(), r.values() * 10000.0); }

MonthlySeries positive_component(const MonthlySeries& s) { return MonthlySeries(s.name(), s.start(), -s.values()); }

void write_csv(std::ostream& out, const AlignedFrame& frame) {
    out << "date";
    for (const auto& n : frame.names()) out << ',' << n;
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < frame.rows(); ++i) {
        out << frame.month(i).str();
        for (Eigen::Index j = 0; j < frame.cols(); ++j) out << ',' << frame.data()(i, j);
        out << '\n';
    }
}

}  // namespace crisk
