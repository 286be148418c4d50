#pragma once

#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ius {

/// Strictly ascending, duplicate-free list of trading days.
class TradingCalendar {
public:
    TradingCalendar() = default;
    explicit TradingCalendar(std::vector<Date> days);

    [[nodiscard]] const std::vector<Date>& days() const { return days_; }
    [[nodiscard]] Index size() const { return static_cast<Index>(days_.size()); }
    [[nodiscard]] bool empty() const { return days_.empty(); }
    [[nodiscard]] Date front() const { return days_.front(); }
    [[nodiscard]] Date back() const { return days_.back(); }
    [[nodiscard]] Date operator[](Index i) const { return days_[static_cast<std::size_t>(i)]; }

    /// Position of `d`, or nullopt when it is not a trading day.
    [[nodiscard]] std::optional<Index> find(Date d) const;
    /// Calendar restricted to [first, last] (positions, inclusive).
    [[nodiscard]] TradingCalendar slice(Index first, Index last) const;

    bool operator==(const TradingCalendar&) const = default;

private:
    std::vector<Date> days_;
};

struct SeriesPoint {
    Date date;
    std::optional<double> value;
};

struct RawSeries {
    std::string name;
    std::vector<SeriesPoint> points;

    [[nodiscard]] std::size_t present_count() const;
    /// Calendar made of every date in the series (missing values included).
    [[nodiscard]] TradingCalendar calendar() const;
};

/// Features x days matrix of named rows over a calendar. Never contains NaN.
struct AlignedFrame {
    TradingCalendar calendar;
    std::vector<std::string> features;
    Matrix values;
    std::map<std::string, std::string> metadata;

    [[nodiscard]] Index feature_count() const { return static_cast<Index>(features.size()); }
    [[nodiscard]] Index day_count() const { return calendar.size(); }
    [[nodiscard]] std::optional<Index> index_of(std::string_view name) const;
    /// Row lookup; throws Error naming the feature when absent.
    [[nodiscard]] Index require(std::string_view name) const;
    [[nodiscard]] auto row(std::string_view name) const { return values.row(require(name)); }

    /// New frame containing only the listed rows, in the listed order.
    [[nodiscard]] AlignedFrame select(std::span<const std::string> names) const;
    /// Columns [first, first+count).
    [[nodiscard]] AlignedFrame days(Index first, Index count) const;
    /// Throws Error if any invariant is broken.
    void validate() const;
};

/// Vertical concatenation of frames sharing one calendar.
AlignedFrame concat(std::span<const AlignedFrame> frames);

enum class EdgePolicy { HoldNearest, TrimCalendar };

EdgePolicy parse_edge_policy(std::string_view s);
std::string_view to_string(EdgePolicy p);

/// Parses delimited text with a header row. Empty value cells become missing
/// points. Errors carry the 1-based line number.
RawSeries parse_series(std::string_view text, std::string_view date_column,
                       std::string_view value_column, char delimiter = ',');

RawSeries read_series_file(const std::string& path, std::string_view date_column,
                           std::string_view value_column, std::string name = {});

/// Linear interpolation onto the calendar, time measured in day ordinals.
/// Present values pass through; days outside the first/last present value are
/// held at the nearest present value.
std::vector<double> interpolate_linear(const RawSeries& series, const TradingCalendar& calendar);

AlignedFrame align(std::span<const RawSeries> series, const TradingCalendar& calendar,
                   EdgePolicy edge_policy = EdgePolicy::HoldNearest);

/// Rows of a frame turned back into complete series.
std::vector<RawSeries> to_series(const AlignedFrame& frame);

/// 1 where the next value is not lower, 0 otherwise. Length n-1.
std::vector<int> label_movement(std::span<const double> target);

// Serialization: tabular (date column + one column per feature) and JSON.
std::string frame_to_csv(const AlignedFrame& frame);
AlignedFrame frame_from_csv(std::string_view text);
nlohmann::json frame_to_json(const AlignedFrame& frame);
AlignedFrame frame_from_json(const nlohmann::json& doc);

// Small helpers shared by the tabular readers.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);
/// Shortest round-trip decimal representation.
std::string format_real(double v);

}  // namespace ius
