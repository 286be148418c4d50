#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ius {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Calendar date stored as a day ordinal (days since 1970-01-01).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t ordinal) : ordinal_(ordinal) {}

    /// Parses YYYY-MM-DD; throws Error on malformed or impossible dates.
    static Date parse(std::string_view iso);
    static Date from_ymd(int year, unsigned month, unsigned day);

    [[nodiscard]] constexpr std::int32_t ordinal() const { return ordinal_; }
    [[nodiscard]] std::string iso() const;

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t ordinal_ = 0;
};

constexpr std::int32_t days_between(Date a, Date b) { return b.ordinal() - a.ordinal(); }

}  // namespace ius
