#pragma once

#include "crisk/neural.hpp"
#include "crisk/preprocess.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace crisk {

struct DataSource {
    std::string file;
    std::string column;

    bool operator==(const DataSource&) const = default;
};

inline constexpr int kDefaultRestarts = 50;
inline constexpr int kFullScaleRestarts = 5000;

/// Everything a run needs, read from a flat `key = value` file.
///
///   data.<variable>.file / data.<variable>.column   variables: igaem, embi_ve, embi_global, tbill
///   var.window, var.confidence
///   smoothing.beta, smoothing.seed                  seed: a number or "first"
///   ba.level1, ba.level2                            e.g. "2:1,4:2"
///   basesets.enabled, basesets.single_lag, basesets.max_lag, basesets.max_rows, basesets.min_rows
///   train.cycles, train.stop_error, train.learning_rate, train.restarts, train.seed, train.split,
///   train.hidden, train.init_range, train.min_rows, train.threads
///   ensemble.members, output.dir, report.formats
struct PipelineConfig {
    std::map<std::string, DataSource> data;
    PreprocessConfig preprocess;
    TrainConfig train;
    int members = 10;
    std::string output_dir = "runs";
    std::vector<std::string> report_formats{"csv", "txt"};
    /// Directory relative paths are resolved against; not serialized.
    std::filesystem::path base_dir;

    PipelineConfig();

    static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& file);

    /// Sets one key; throws InvalidConfig for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    void use_full_scale() { train.restarts = kFullScaleRestarts; }

    std::string serialize() const;
    /// 16 hex digits identifying the serialized config.
    std::string hash() const;

    std::filesystem::path resolve(const std::string& path) const;
    /// Copy whose data files and output directory are absolute paths.
    PipelineConfig with_absolute_paths() const;
    void validate() const;
    /// Throws MissingFile when a referenced data file does not exist.
    void check_files() const;

    bool operator==(const PipelineConfig& o) const {
        return data == o.data && preprocess == o.preprocess && train == o.train && members == o.members &&
               output_dir == o.output_dir && report_formats == o.report_formats;
    }
};

std::vector<std::string> required_variables();

}  // namespace crisk
