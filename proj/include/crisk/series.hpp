#pragma once

#include "crisk/error.hpp"

#include <Eigen/Core>

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crisk {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Calendar month stored as the integer key year*12 + (month-1), so that
/// consecutive months differ by exactly one.
class YearMonth {
public:
    constexpr YearMonth() = default;
    constexpr YearMonth(int year, int month) : key_(year * 12 + (month - 1)) {
        if (month < 1 || month > 12) throw Error(ErrorCode::ParseError, "month out of range");
    }

    static constexpr YearMonth from_key(int key) {
        YearMonth ym;
        ym.key_ = key;
        return ym;
    }

    /// Parses "YYYY-MM"; nullopt on anything else.
    static std::optional<YearMonth> parse(std::string_view text);

    constexpr int key() const noexcept { return key_; }
    constexpr int year() const noexcept { return floor_div(key_, 12); }
    constexpr int month() const noexcept { return key_ - floor_div(key_, 12) * 12 + 1; }
    std::string str() const;

    constexpr YearMonth operator+(int months) const noexcept { return from_key(key_ + months); }
    constexpr YearMonth operator-(int months) const noexcept { return from_key(key_ - months); }
    constexpr int operator-(YearMonth other) const noexcept { return key_ - other.key_; }
    constexpr auto operator<=>(const YearMonth&) const = default;

private:
    static constexpr int floor_div(int a, int b) noexcept { return (a >= 0) ? a / b : -((-a + b - 1) / b); }
    int key_ = 0;
};

std::ostream& operator<<(std::ostream& os, YearMonth ym);

/// Gap-free monthly sequence of one variable. Immutable once built.
class MonthlySeries {
public:
    MonthlySeries() = default;
    MonthlySeries(std::string name, YearMonth start, Vector<double> values);

    /// Validates ordering (strictly increasing, no duplicates, no gaps).
    static MonthlySeries from_observations(std::string name,
                                           const std::vector<std::pair<YearMonth, double>>& obs);

    const std::string& name() const noexcept { return name_; }
    YearMonth start() const noexcept { return start_; }
    /// Last month covered. Undefined for an empty series.
    YearMonth last() const noexcept { return start_ + static_cast<int>(values_.size()) - 1; }
    Eigen::Index size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.size() == 0; }
    const Vector<double>& values() const noexcept { return values_; }
    double operator[](Eigen::Index i) const { return values_(i); }
    YearMonth month(Eigen::Index i) const noexcept { return start_ + static_cast<int>(i); }
    bool covers(YearMonth m) const noexcept { return !empty() && m >= start_ && m <= last(); }
    std::optional<double> at(YearMonth m) const;

    /// Sub-range [from, to], both inclusive and inside the series.
    MonthlySeries slice(YearMonth from, YearMonth to) const;
    MonthlySeries renamed(std::string name) const;
    /// Same values, every date moved by `months`.
    MonthlySeries shifted(int months) const;

private:
    std::string name_;
    YearMonth start_;
    Vector<double> values_;
};

/// Several variables sharing one calendar axis. Column j of `data()` is the
/// variable `names()[j]`; row i is month `start() + i`.
class AlignedFrame {
public:
    AlignedFrame() = default;
    AlignedFrame(YearMonth start, std::vector<std::string> names, Matrix<double> data);

    YearMonth start() const noexcept { return start_; }
    YearMonth last() const noexcept { return start_ + static_cast<int>(data_.rows()) - 1; }
    Eigen::Index rows() const noexcept { return data_.rows(); }
    Eigen::Index cols() const noexcept { return data_.cols(); }
    YearMonth month(Eigen::Index i) const noexcept { return start_ + static_cast<int>(i); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Matrix<double>& data() const noexcept { return data_; }

    bool has(std::string_view name) const noexcept;
    Eigen::Index index_of(std::string_view name) const;  // throws MissingColumn
    auto column(std::string_view name) const { return data_.col(index_of(name)); }
    MonthlySeries series(std::string_view name) const;
    std::vector<MonthlySeries> to_series() const;

private:
    YearMonth start_;
    std::vector<std::string> names_;
    Matrix<double> data_;
};

/// Maps an output series name to the CSV header it is read from.
struct ColumnSpec {
    std::string name;
    std::string column;
};

std::vector<MonthlySeries> load_series(const std::filesystem::path& path, const std::vector<ColumnSpec>& columns);
std::vector<MonthlySeries> load_series(std::istream& in, const std::vector<ColumnSpec>& columns);

/// Truncates every series to the common month range.
AlignedFrame align(const std::vector<MonthlySeries>& series);

MonthlySeries log_returns(const MonthlySeries& s);
MonthlySeries to_basis_points(const MonthlySeries& r);
MonthlySeries positive_component(const MonthlySeries& s);

void write_csv(std::ostream& out, const AlignedFrame& frame);

}  // namespace crisk
