#pragma once

#include "crisk/series.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace crisk {

/// Demo data: the target is a fixed nonlinear function of the global spread
/// and T-bill rate `target_lag` months earlier, plus Gaussian noise.
struct SyntheticOptions {
    std::uint64_t seed = 7;
    YearMonth indicator_start{1990, 1};
    YearMonth start{2000, 1};
    YearMonth end{2009, 12};
    int target_lag = 3;
    double noise = 0.05;  // noise std as a share of the signal std
};

/// igaem, embi_ve, embi_global and tbill, in that order.
std::vector<MonthlySeries> make_synthetic_dataset(const SyntheticOptions& opt = {});

/// Noise-free target value for the given lagged global spread and T-bill rate.
double synthetic_target(double global, double tbill) noexcept;

/// One CSV with a `date` column and one column per series, over the months
/// all of them cover.
void write_dataset_csv(const std::vector<MonthlySeries>& series, const std::filesystem::path& file);

}  // namespace crisk
