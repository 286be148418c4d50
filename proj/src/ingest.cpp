#include "ius/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ius {

TradingCalendar::TradingCalendar(std::vector<Date> days) : days_(std::move(days)) {
    if (days_.empty()) throw Error("trading calendar is empty");
    for (std::size_t i = 1; i < days_.size(); ++i) {
        if (days_[i] <= days_[i - 1])
            throw Error(fmt::format("trading calendar not strictly ascending at {}", days_[i].iso()));
    }
}

std::optional<Index> TradingCalendar::find(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (it == days_.end() || *it != d) return std::nullopt;
    return static_cast<Index>(it - days_.begin());
}

TradingCalendar TradingCalendar::slice(Index first, Index last) const {
    if (first < 0 || last >= size() || first > last) throw Error("calendar slice out of range");
    return TradingCalendar({days_.begin() + first, days_.begin() + last + 1});
}

std::size_t RawSeries::present_count() const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const auto& p) { return p.value.has_value(); }));
}

TradingCalendar RawSeries::calendar() const {
    std::vector<Date> days;
    days.reserve(points.size());
    for (const auto& p : points) days.push_back(p.date);
    return TradingCalendar(std::move(days));
}

std::optional<Index> AlignedFrame::index_of(std::string_view name) const {
    auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) return std::nullopt;
    return static_cast<Index>(it - features.begin());
}

Index AlignedFrame::require(std::string_view name) const {
    if (auto i = index_of(name)) return *i;
    throw Error(fmt::format("feature '{}' not in frame", name));
}

AlignedFrame AlignedFrame::select(std::span<const std::string> names) const {
    AlignedFrame out;
    out.calendar = calendar;
    out.metadata = metadata;
    out.values.resize(static_cast<Index>(names.size()), day_count());
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.values.row(static_cast<Index>(i)) = values.row(require(names[i]));
        out.features.push_back(names[i]);
    }
    return out;
}

AlignedFrame AlignedFrame::days(Index first, Index count) const {
    AlignedFrame out;
    out.calendar = calendar.slice(first, first + count - 1);
    out.features = features;
    out.values = values.middleCols(first, count);
    out.metadata = metadata;
    return out;
}

void AlignedFrame::validate() const {
    if (values.rows() != feature_count())
        throw Error(fmt::format("frame has {} rows but {} feature names", values.rows(), feature_count()));
    if (values.cols() != day_count())
        throw Error(fmt::format("frame has {} columns but {} calendar days", values.cols(), day_count()));
    if (!values.allFinite()) throw Error("frame contains missing or non-finite entries");
}

AlignedFrame concat(std::span<const AlignedFrame> frames) {
    if (frames.empty()) throw Error("nothing to concatenate");
    AlignedFrame out;
    out.calendar = frames.front().calendar;
    Index rows = 0;
    for (const auto& f : frames) {
        if (!(f.calendar == out.calendar)) throw Error("cannot concatenate frames on different calendars");
        rows += f.feature_count();
    }
    out.values.resize(rows, out.calendar.size());
    Index r = 0;
    for (const auto& f : frames) {
        out.values.middleRows(r, f.feature_count()) = f.values;
        r += f.feature_count();
        for (const auto& n : f.features) {
            if (out.index_of(n)) throw Error(fmt::format("duplicate feature '{}' in concatenation", n));
            out.features.push_back(n);
        }
        for (const auto& [k, v] : f.metadata) out.metadata.emplace(k, v);
    }
    return out;
}

EdgePolicy parse_edge_policy(std::string_view s) {
    if (s == "hold-nearest") return EdgePolicy::HoldNearest;
    if (s == "trim-calendar") return EdgePolicy::TrimCalendar;
    throw Error(fmt::format("unknown edge policy '{}'", s));
}

std::string_view to_string(EdgePolicy p) {
    return p == EdgePolicy::HoldNearest ? "hold-nearest" : "trim-calendar";
}

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delimiter) {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(std::move(cell));
    for (auto& c : cells) {
        auto b = c.find_first_not_of(" \t");
        auto e = c.find_last_not_of(" \t");
        c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
    }
    return cells;
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

bool blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::optional<double> parse_real(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(fmt::format("column '{}' not found in header", name));
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

RawSeries parse_series(std::string_view text, std::string_view date_column, std::string_view value_column,
                       char delimiter) {
    const auto lines = lines_of(text);
    std::size_t first = 0;
    while (first < lines.size() && blank(lines[first])) ++first;
    if (first == lines.size()) throw Error("series text has no header row");
    auto header = split_delimited(lines[first], delimiter);
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    const auto date_idx = column_index(header, date_column);
    const auto value_idx = column_index(header, value_column);

    RawSeries series;
    series.name = std::string(value_column);
    for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
        if (blank(lines[ln])) continue;
        const auto cells = split_delimited(lines[ln], delimiter);
        const auto line_no = ln + 1;
        if (cells.size() != header.size())
            throw Error(fmt::format("line {}: expected {} cells, found {}", line_no, header.size(), cells.size()));
        Date date;
        try {
            date = Date::parse(cells[date_idx]);
        } catch (const Error& e) {
            throw Error(fmt::format("line {}: {}", line_no, e.what()));
        }
        std::optional<double> value;
        if (!cells[value_idx].empty()) {
            value = parse_real(cells[value_idx]);
            if (!value) throw Error(fmt::format("line {}: unparseable value '{}'", line_no, cells[value_idx]));
        }
        series.points.push_back({date, value});
    }
    std::stable_sort(series.points.begin(), series.points.end(),
                     [](const auto& a, const auto& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.points.size(); ++i) {
        if (series.points[i].date == series.points[i - 1].date)
            throw Error(fmt::format("duplicate date {} in series '{}'", series.points[i].date.iso(), series.name));
    }
    return series;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", path));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(fmt::format("write to '{}' failed", path));
}

std::string format_real(double v) { return fmt::format("{}", v); }

RawSeries read_series_file(const std::string& path, std::string_view date_column, std::string_view value_column,
                           std::string name) {
    RawSeries s;
    try {
        s = parse_series(read_text_file(path), date_column, value_column);
    } catch (const Error& e) {
        throw Error(fmt::format("{}: {}", path, e.what()));
    }
    if (!name.empty()) s.name = std::move(name);
    return s;
}

std::vector<double> interpolate_linear(const RawSeries& series, const TradingCalendar& calendar) {
    std::vector<std::pair<std::int32_t, double>> known;
    for (const auto& p : series.points)
        if (p.value) known.emplace_back(p.date.ordinal(), *p.value);
    if (known.empty()) throw Error(fmt::format("series '{}' has no present values", series.name));
    if (known.size() < 2)
        throw Error(fmt::format("series '{}' needs at least two present values to interpolate", series.name));

    std::vector<double> out;
    out.reserve(calendar.days().size());
    for (const Date day : calendar.days()) {
        const auto t = day.ordinal();
        auto hi = std::lower_bound(known.begin(), known.end(), t,
                                   [](const auto& k, std::int32_t v) { return k.first < v; });
        if (hi != known.end() && hi->first == t) {
            out.push_back(hi->second);
        } else if (hi == known.begin()) {
            out.push_back(known.front().second);
        } else if (hi == known.end()) {
            out.push_back(known.back().second);
        } else {
            const auto& [ta, va] = *(hi - 1);
            const auto& [tb, vb] = *hi;
            out.push_back(va + (vb - va) * static_cast<double>(t - ta) / static_cast<double>(tb - ta));
        }
    }
    return out;
}

AlignedFrame align(std::span<const RawSeries> series, const TradingCalendar& calendar, EdgePolicy edge_policy) {
    if (series.empty()) throw Error("align: empty series list");
    if (calendar.empty()) throw Error("align: empty calendar");

    Date span_first = calendar.front();
    Date span_last = calendar.back();
    for (const auto& s : series) {
        std::optional<Date> first, last;
        for (const auto& p : s.points) {
            if (!p.value) continue;
            if (!first) first = p.date;
            last = p.date;
        }
        if (!first) throw Error(fmt::format("series '{}' has no present values", s.name));
        if (*last < calendar.front() || *first > calendar.back())
            throw Error(fmt::format("series '{}' ({}..{}) does not overlap the calendar ({}..{})", s.name,
                                    first->iso(), last->iso(), calendar.front().iso(), calendar.back().iso()));
        span_first = std::max(span_first, *first);
        span_last = std::min(span_last, *last);
    }

    AlignedFrame frame;
    frame.metadata["edge_policy"] = std::string(to_string(edge_policy));
    frame.calendar = calendar;
    if (edge_policy == EdgePolicy::TrimCalendar) {
        std::vector<Date> kept;
        for (const Date d : calendar.days())
            if (d >= span_first && d <= span_last) kept.push_back(d);
        if (kept.empty()) throw Error("align: series share no common span inside the calendar");
        const auto leading = std::count_if(calendar.days().begin(), calendar.days().end(),
                                           [&](Date d) { return d < span_first; });
        const auto trailing = std::count_if(calendar.days().begin(), calendar.days().end(),
                                            [&](Date d) { return d > span_last; });
        frame.metadata["trimmed_leading_days"] = std::to_string(leading);
        frame.metadata["trimmed_trailing_days"] = std::to_string(trailing);
        frame.calendar = TradingCalendar(std::move(kept));
    }

    frame.values.resize(static_cast<Index>(series.size()), frame.calendar.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto row = interpolate_linear(series[i], frame.calendar);
        frame.values.row(static_cast<Index>(i)) = Eigen::Map<const RowVector>(row.data(), static_cast<Index>(row.size()));
        if (frame.index_of(series[i].name)) throw Error(fmt::format("duplicate series name '{}'", series[i].name));
        frame.features.push_back(series[i].name);
    }
    return frame;
}

std::vector<RawSeries> to_series(const AlignedFrame& frame) {
    std::vector<RawSeries> out;
    for (Index r = 0; r < frame.feature_count(); ++r) {
        RawSeries s;
        s.name = frame.features[static_cast<std::size_t>(r)];
        for (Index c = 0; c < frame.day_count(); ++c) s.points.push_back({frame.calendar[c], frame.values(r, c)});
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<int> label_movement(std::span<const double> target) {
    if (target.size() < 2) throw Error("label_movement needs at least two values");
    std::vector<int> labels(target.size() - 1);
    for (std::size_t d = 0; d + 1 < target.size(); ++d) labels[d] = target[d + 1] < target[d] ? 0 : 1;
    return labels;
}

std::string frame_to_csv(const AlignedFrame& frame) {
    std::string out = "date";
    for (const auto& f : frame.features) out += "," + f;
    out += '\n';
    for (Index c = 0; c < frame.day_count(); ++c) {
        out += frame.calendar[c].iso();
        for (Index r = 0; r < frame.feature_count(); ++r) {
            out += ',';
            out += format_real(frame.values(r, c));
        }
        out += '\n';
    }
    return out;
}

AlignedFrame frame_from_csv(std::string_view text) {
    const auto lines = lines_of(text);
    std::size_t first = 0;
    while (first < lines.size() && blank(lines[first])) ++first;
    if (first == lines.size()) throw Error("frame text has no header row");
    const auto header = split_delimited(lines[first], ',');
    if (header.empty() || header[0] != "date") throw Error("frame header must start with 'date'");

    AlignedFrame frame;
    frame.features.assign(header.begin() + 1, header.end());
    std::vector<Date> days;
    std::vector<std::vector<double>> cols;
    for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
        if (blank(lines[ln])) continue;
        const auto cells = split_delimited(lines[ln], ',');
        if (cells.size() != header.size())
            throw Error(fmt::format("line {}: expected {} cells, found {}", ln + 1, header.size(), cells.size()));
        days.push_back(Date::parse(cells[0]));
        std::vector<double> col;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            auto v = parse_real(cells[i]);
            if (!v) throw Error(fmt::format("line {}: unparseable value '{}'", ln + 1, cells[i]));
            col.push_back(*v);
        }
        cols.push_back(std::move(col));
    }
    frame.calendar = TradingCalendar(std::move(days));
    frame.values.resize(frame.feature_count(), frame.calendar.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < cols[c].size(); ++r)
            frame.values(static_cast<Index>(r), static_cast<Index>(c)) = cols[c][r];
    frame.validate();
    return frame;
}

nlohmann::json frame_to_json(const AlignedFrame& frame) {
    nlohmann::json doc;
    auto& days = doc["calendar"] = nlohmann::json::array();
    for (const Date d : frame.calendar.days()) days.push_back(d.iso());
    doc["features"] = frame.features;
    auto& rows = doc["values"] = nlohmann::json::array();
    for (Index r = 0; r < frame.feature_count(); ++r) {
        std::vector<double> row(frame.values.row(r).begin(), frame.values.row(r).end());
        rows.push_back(row);
    }
    doc["metadata"] = frame.metadata;
    return doc;
}

AlignedFrame frame_from_json(const nlohmann::json& doc) {
    AlignedFrame frame;
    std::vector<Date> days;
    for (const auto& d : doc.at("calendar")) days.push_back(Date::parse(d.get<std::string>()));
    frame.calendar = TradingCalendar(std::move(days));
    frame.features = doc.at("features").get<std::vector<std::string>>();
    frame.values.resize(frame.feature_count(), frame.calendar.size());
    const auto& rows = doc.at("values");
    if (static_cast<Index>(rows.size()) != frame.feature_count()) throw Error("frame document row count mismatch");
    for (Index r = 0; r < frame.feature_count(); ++r) {
        const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Index>(row.size()) != frame.day_count()) throw Error("frame document column count mismatch");
        for (Index c = 0; c < frame.day_count(); ++c) frame.values(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (doc.contains("metadata")) frame.metadata = doc["metadata"].get<std::map<std::string, std::string>>();
    frame.validate();
    return frame;
}

}  // namespace ius
