#include "ius/types.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

namespace ius {

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) throw Error(fmt::format("invalid date {:04d}-{:02d}-{:02d}", year, month, day));
    return Date(static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
    // Tolerate surrounding whitespace and a trailing time component.
    while (!iso.empty() && (iso.front() == ' ' || iso.front() == '\t')) iso.remove_prefix(1);
    while (!iso.empty() && (iso.back() == ' ' || iso.back() == '\t' || iso.back() == '\r'))
        iso.remove_suffix(1);
    if (iso.size() > 10 && (iso[10] == 'T' || iso[10] == ' ')) iso = iso.substr(0, 10);
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw Error(fmt::format("unparseable date '{}'", iso));
    int y = 0;
    unsigned m = 0, d = 0;
    if (!parse_number(iso.substr(0, 4), y) || !parse_number(iso.substr(5, 2), m) ||
        !parse_number(iso.substr(8, 2), d))
        throw Error(fmt::format("unparseable date '{}'", iso));
    return from_ymd(y, m, d);
}

std::string Date::iso() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{ordinal_}}};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace ius
