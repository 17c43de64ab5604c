#include "crisk/synthetic.hpp"

#include "crisk/preprocess.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace crisk {

double synthetic_target(double global, double tbill) noexcept {
    return 900.0 + 250.0 * std::tanh((global - 500.0) / 120.0) - 120.0 * std::tanh(tbill - 3.0);
}

std::vector<MonthlySeries> make_synthetic_dataset(const SyntheticOptions& opt) {
    if (opt.end < opt.start || opt.start < opt.indicator_start || opt.target_lag < 0 || opt.noise < 0.0)
        throw Error(ErrorCode::InvalidConfig, "bad synthetic dataset options");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> z(0.0, 1.0);

    const int n_ind = (opt.end - opt.indicator_start) + 1;
    Vector<double> igaem(n_ind);
    double level = 100.0;
    for (int i = 0; i < n_ind; ++i) {
        level *= std::exp(0.002 + 0.02 * z(rng));
        igaem(i) = level;
    }

    const int n = (opt.end - opt.start) + 1;
    const int warm = opt.target_lag;
    Vector<double> g(n + warm), t(n + warm);
    double gx = 500.0, tx = 3.0;
    for (int i = 0; i < n + warm; ++i) {
        gx = 500.0 + 0.6 * (gx - 500.0) + 60.0 * z(rng);
        tx = std::max(0.1, 3.0 + 0.7 * (tx - 3.0) + 0.5 * z(rng));
        g(i) = gx;
        t(i) = tx;
    }
    Vector<double> signal(n);
    for (int i = 0; i < n; ++i) signal(i) = synthetic_target(g(i), t(i));  // inputs target_lag months earlier
    const double mean = signal.mean();
    const double sd = std::sqrt((signal.array() - mean).square().sum() / static_cast<double>(n - 1));
    Vector<double> embi(n);
    for (int i = 0; i < n; ++i) embi(i) = signal(i) + opt.noise * sd * z(rng);

    return {MonthlySeries(kIgaem, opt.indicator_start, igaem), MonthlySeries(kEmbiVe, opt.start, embi),
            MonthlySeries(kEmbiGlobal, opt.start, g.tail(n)), MonthlySeries(kTbill, opt.start, t.tail(n))};
}

void write_dataset_csv(const std::vector<MonthlySeries>& series, const std::filesystem::path& file) {
    const auto frame = align(series);
    if (!file.parent_path().empty()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    write_csv(out, frame);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + file.string());
}

}  // namespace crisk
