#include "crisk/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crisk {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    s = trim(s);
    if (s.empty()) return out;
    for (;;) {
        const auto comma = s.find(',');
        out.push_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
    throw Error(ErrorCode::InvalidConfig,
                std::string(key) + " = '" + std::string(value) + "': expected " + std::string(expected));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto v = trim(value);
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || end != v.data() + v.size() || v.empty()) bad(key, value, "a number");
    return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
    std::vector<int> out;
    for (auto item : split_list(value)) out.push_back(parse_number<int>(key, item));
    return out;
}

std::vector<BlockAverageConfig> parse_ba(std::string_view key, std::string_view value) {
    std::vector<BlockAverageConfig> out;
    for (auto item : split_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) bad(key, value, "M:n pairs");
        out.push_back({parse_number<int>(key, item.substr(0, colon)), parse_number<int>(key, item.substr(colon + 1))});
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& each) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += each(items[i]);
    }
    return out;
}

}  // namespace

std::vector<std::string> required_variables() { return {kIgaem, kEmbiVe, kEmbiGlobal, kTbill}; }

PipelineConfig::PipelineConfig() { train.restarts = kDefaultRestarts; }

void PipelineConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key.starts_with("data.")) {
        const auto rest = key.substr(5);
        const auto dot = rest.rfind('.');
        const auto var = std::string(rest.substr(0, dot));
        const auto field = dot == std::string_view::npos ? std::string_view{} : rest.substr(dot + 1);
        const auto vars = required_variables();
        if (std::find(vars.begin(), vars.end(), var) == vars.end())
            throw Error(ErrorCode::InvalidConfig, "unknown data variable '" + var + "'");
        if (field == "file") {
            data[var].file = std::string(value);
        } else if (field == "column") {
            data[var].column = std::string(value);
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
        }
        return;
    }
    auto& pp = preprocess;
    if (key == "var.window") pp.var.window = parse_number<int>(key, value);
    else if (key == "var.confidence") pp.var.confidence = parse_number<double>(key, value);
    else if (key == "smoothing.beta") pp.smoothing.beta = parse_number<double>(key, value);
    else if (key == "smoothing.seed") {
        if (value == "first") pp.smoothing.seed.reset();
        else pp.smoothing.seed = parse_number<double>(key, value);
    }
    else if (key == "ba.level1") pp.ba_level1 = parse_ba(key, value);
    else if (key == "ba.level2") pp.ba_level2 = parse_ba(key, value);
    else if (key == "basesets.enabled") pp.enabled_sets = parse_int_list(key, value);
    else if (key == "basesets.single_lag") pp.single_lag = parse_number<int>(key, value);
    else if (key == "basesets.max_lag") pp.max_lag = parse_number<int>(key, value);
    else if (key == "basesets.max_rows") pp.max_rows = parse_number<int>(key, value);
    else if (key == "basesets.min_rows") pp.min_rows = parse_number<int>(key, value);
    else if (key == "train.cycles") train.cycles = parse_number<int>(key, value);
    else if (key == "train.stop_error") train.stop_error = parse_number<double>(key, value);
    else if (key == "train.learning_rate") train.learning_rate = parse_number<double>(key, value);
    else if (key == "train.restarts") train.restarts = parse_number<int>(key, value);
    else if (key == "train.seed") train.rng_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "train.split") train.split = parse_number<double>(key, value);
    else if (key == "train.hidden") train.hidden_layers = parse_int_list(key, value);
    else if (key == "train.init_range") train.init_range = parse_number<double>(key, value);
    else if (key == "train.min_rows") train.min_rows = parse_number<int>(key, value);
    else if (key == "train.threads") train.threads = parse_number<int>(key, value);
    else if (key == "ensemble.members") members = parse_number<int>(key, value);
    else if (key == "output.dir") output_dir = std::string(value);
    else if (key == "report.formats") {
        report_formats.clear();
        for (auto f : split_list(value)) {
            if (f != "csv" && f != "txt") bad(key, value, "csv and/or txt");
            report_formats.emplace_back(f);
        }
    }
    else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(key) + "'");
}

PipelineConfig PipelineConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    cfg.base_dir = base_dir;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_no) + ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open config " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), file.parent_path());
}

std::string PipelineConfig::serialize() const {
    std::ostringstream o;
    for (const auto& [var, src] : data) {
        o << "data." << var << ".file = " << src.file << '\n';
        o << "data." << var << ".column = " << src.column << '\n';
    }
    const auto& pp = preprocess;
    auto ba = [](const BlockAverageConfig& b) { return std::to_string(b.M) + ':' + std::to_string(b.n); };
    auto num = [](int v) { return std::to_string(v); };
    o << "var.window = " << pp.var.window << '\n'
      << "var.confidence = " << fmt(pp.var.confidence) << '\n'
      << "smoothing.beta = " << fmt(pp.smoothing.beta) << '\n'
      << "smoothing.seed = " << (pp.smoothing.seed ? fmt(*pp.smoothing.seed) : std::string("first")) << '\n'
      << "ba.level1 = " << join(pp.ba_level1, ba) << '\n'
      << "ba.level2 = " << join(pp.ba_level2, ba) << '\n'
      << "basesets.enabled = " << join(pp.enabled_sets, num) << '\n'
      << "basesets.single_lag = " << pp.single_lag << '\n'
      << "basesets.max_lag = " << pp.max_lag << '\n'
      << "basesets.max_rows = " << pp.max_rows << '\n'
      << "basesets.min_rows = " << pp.min_rows << '\n'
      << "train.cycles = " << train.cycles << '\n'
      << "train.stop_error = " << fmt(train.stop_error) << '\n'
      << "train.learning_rate = " << fmt(train.learning_rate) << '\n'
      << "train.restarts = " << train.restarts << '\n'
      << "train.seed = " << train.rng_seed << '\n'
      << "train.split = " << fmt(train.split) << '\n'
      << "train.hidden = " << join(train.hidden_layers, num) << '\n'
      << "train.init_range = " << fmt(train.init_range) << '\n'
      << "train.min_rows = " << train.min_rows << '\n'
      << "train.threads = " << train.threads << '\n'
      << "ensemble.members = " << members << '\n'
      << "output.dir = " << output_dir << '\n'
      << "report.formats = " << join(report_formats, [](const std::string& s) { return s; }) << '\n';
    return o.str();
}

std::string PipelineConfig::hash() const {
    // FNV-1a of the serialized form, thread count left out
    PipelineConfig copy = *this;
    copy.train.threads = 0;
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : copy.serialize()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

PipelineConfig PipelineConfig::with_absolute_paths() const {
    PipelineConfig out = *this;
    for (auto& [var, src] : out.data) src.file = std::filesystem::absolute(resolve(src.file)).lexically_normal().string();
    out.output_dir = std::filesystem::absolute(resolve(output_dir)).lexically_normal().string();
    out.base_dir.clear();
    return out;
}

void PipelineConfig::validate() const {
    for (const auto& var : required_variables()) {
        const auto it = data.find(var);
        if (it == data.end() || it->second.file.empty())
            throw Error(ErrorCode::InvalidConfig, "no data file configured for '" + var + "'");
    }
    preprocess.validate();
    train.validate();
    if (members < 1) throw Error(ErrorCode::InvalidConfig, "ensemble.members must be positive");
    if (report_formats.empty()) throw Error(ErrorCode::InvalidConfig, "report.formats is empty");
}

void PipelineConfig::check_files() const {
    for (const auto& [var, src] : data)
        if (!std::filesystem::exists(resolve(src.file)))
            throw Error(ErrorCode::MissingFile, var + ": " + resolve(src.file).string() + " does not exist");
}

}  // namespace crisk
