#include "qrport/data_ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "qrport/errors.hpp"

namespace qrport {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<Date> dates;
    std::vector<std::vector<double>> rows;
};

void parse_body_row(const std::vector<std::string_view>& fields, std::size_t line_no,
                    std::size_t n_assets, RawTable& table) {
    const auto date = parse_date(fields[0]);
    if (!date) throw ParseError("unparseable date '" + std::string(fields[0]) + "'", line_no);
    if (fields.size() != n_assets + 1) {
        throw ParseError("expected " + std::to_string(n_assets + 1) + " fields, found " +
                             std::to_string(fields.size()),
                         line_no);
    }
    std::vector<double> row(n_assets);
    for (std::size_t j = 0; j < n_assets; ++j) {
        const auto v = parse_double(fields[j + 1]);
        if (!v) {
            throw ParseError("non-numeric value '" + std::string(fields[j + 1]) + "'", line_no);
        }
        row[j] = is_sentinel(*v) ? kMissing : *v;
    }
    table.dates.push_back(*date);
    table.rows.push_back(std::move(row));
}

RawTable parse_plain(const std::vector<std::string_view>& lines) {
    RawTable table;
    std::size_t i = 0;
    while (i < lines.size() && trim(lines[i]).empty()) ++i;
    if (i == lines.size()) throw ParseError("empty file", 1);
    const auto header = split_fields(lines[i]);
    if (header.size() < 2) throw ParseError("header must name at least one asset", i + 1);
    for (std::size_t j = 1; j < header.size(); ++j) table.header.emplace_back(header[j]);
    for (++i; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        parse_body_row(split_fields(lines[i]), i + 1, table.header.size(), table);
    }
    return table;
}

RawTable parse_french(const std::vector<std::string_view>& lines) {
    RawTable table;
    std::size_t i = 0;
    for (; i < lines.size(); ++i) {
        const auto fields = split_fields(lines[i]);
        if (fields.size() >= 3 && fields[0].empty() && !fields[1].empty()) break;
    }
    if (i == lines.size()) throw ParseError("no header row (',' followed by asset names)", 1);
    const auto header = split_fields(lines[i]);
    for (std::size_t j = 1; j < header.size(); ++j) table.header.emplace_back(header[j]);
    // The first block ends at the first line that does not start with a date.
    for (++i; i < lines.size(); ++i) {
        const auto fields = split_fields(lines[i]);
        if (fields.empty() || !parse_date(fields[0])) break;
        parse_body_row(fields, i + 1, table.header.size(), table);
    }
    return table;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
    text = trim(text);
    std::optional<int> y, m, d;
    if (text.size() == 8) {
        y = parse_int(text.substr(0, 4));
        m = parse_int(text.substr(4, 2));
        d = parse_int(text.substr(6, 2));
    } else if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        y = parse_int(text.substr(0, 4));
        m = parse_int(text.substr(5, 2));
        d = parse_int(text.substr(8, 2));
    }
    if (!y || !m || !d || *m < 1 || *d < 1) return std::nullopt;
    const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) return std::nullopt;
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::sys_days iso_week_key(const Date& d) {
    const std::chrono::sys_days day{d};
    const unsigned iso = std::chrono::weekday{day}.iso_encoding();  // Mon=1..Sun=7
    return day - std::chrono::days{iso - 1};
}

bool DailyPanel::is_missing(Eigen::Index t, Eigen::Index j) const {
    return std::isnan(returns(t, j));
}

CsvLayout parse_layout(std::string_view tag) {
    if (tag == "plain") return CsvLayout::plain;
    if (tag == "french") return CsvLayout::french;
    throw UsageError("unknown CSV layout '" + std::string(tag) + "' (plain|french)");
}

MissingPolicy parse_missing_policy(std::string_view tag) {
    if (tag == "fail") return MissingPolicy::fail;
    if (tag == "drop-week") return MissingPolicy::drop_week;
    throw UsageError("unknown missing-data policy '" + std::string(tag) + "' (fail|drop-week)");
}

bool is_sentinel(double value) { return value == -99.99 || value == -999.0; }

DailyPanel parse_daily_csv(std::string_view text, CsvLayout layout) {
    const auto lines = split_lines(text);
    RawTable raw = layout == CsvLayout::plain ? parse_plain(lines) : parse_french(lines);

    DailyPanel panel;
    panel.asset_ids = std::move(raw.header);
    panel.dates = std::move(raw.dates);
    panel.returns.resize(static_cast<Eigen::Index>(panel.dates.size()),
                         static_cast<Eigen::Index>(panel.asset_ids.size()));
    for (std::size_t t = 0; t < raw.rows.size(); ++t) {
        for (std::size_t j = 0; j < panel.asset_ids.size(); ++j) {
            panel.returns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
                raw.rows[t][j];
        }
    }
    validate(panel);
    return panel;
}

DailyPanel load_daily_csv(const std::filesystem::path& path, CsvLayout layout) {
    try {
        return parse_daily_csv(read_file(path), layout);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

void validate(const DailyPanel& panel) {
    if (panel.assets() < 2) throw DataError("panel needs at least 2 assets");
    if (panel.rows() == 0) throw DataError("panel has no data rows");
    if (static_cast<std::size_t>(panel.returns.rows()) != panel.rows() ||
        static_cast<std::size_t>(panel.returns.cols()) != panel.assets()) {
        throw DataError("panel matrix shape does not match dates/assets");
    }
    for (std::size_t t = 1; t < panel.rows(); ++t) {
        if (!(panel.dates[t - 1] < panel.dates[t])) {
            throw DataError("dates not strictly increasing at " + format_date(panel.dates[t]));
        }
    }
}

DailyPanel restrict_dates(const DailyPanel& panel, std::optional<Date> first,
                          std::optional<Date> last) {
    std::vector<Eigen::Index> keep;
    for (std::size_t t = 0; t < panel.rows(); ++t) {
        const auto& d = panel.dates[t];
        if ((first && d < *first) || (last && *last < d)) continue;
        keep.push_back(static_cast<Eigen::Index>(t));
    }
    DailyPanel out;
    out.asset_ids = panel.asset_ids;
    out.returns.resize(static_cast<Eigen::Index>(keep.size()), panel.returns.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        out.dates.push_back(panel.dates[static_cast<std::size_t>(keep[i])]);
        out.returns.row(static_cast<Eigen::Index>(i)) = panel.returns.row(keep[i]);
    }
    return out;
}

ReturnPanel to_weekly(const DailyPanel& panel, MissingPolicy policy, WeeklySummary* summary) {
    validate(panel);
    const Eigen::Index n = panel.returns.cols();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (panel.returns.col(j).array().isNaN().all()) {
            throw DataError("asset '" + panel.asset_ids[static_cast<std::size_t>(j)] +
                            "' has no observations");
        }
    }

    // Contiguous runs of rows sharing an ISO week (dates are increasing).
    std::vector<std::pair<std::size_t, std::size_t>> weeks;
    for (std::size_t t = 0; t < panel.rows();) {
        const auto key = iso_week_key(panel.dates[t]);
        std::size_t end = t + 1;
        while (end < panel.rows() && iso_week_key(panel.dates[end]) == key) ++end;
        weeks.emplace_back(t, end);
        t = end;
    }

    ReturnPanel out;
    out.asset_ids = panel.asset_ids;
    std::vector<Eigen::RowVectorXd> rows;
    WeeklySummary info;
    for (const auto& [begin, end] : weeks) {
        Eigen::RowVectorXd growth = Eigen::RowVectorXd::Ones(n);
        bool missing = false;
        for (std::size_t t = begin; t < end; ++t) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double r = panel.returns(static_cast<Eigen::Index>(t), j);
                if (std::isnan(r)) {
                    missing = true;
                } else {
                    growth(j) *= 1.0 + r / 100.0;
                }
            }
        }
        if (missing) {
            if (policy == MissingPolicy::fail) {
                throw DataError("missing observation in week ending " +
                                format_date(panel.dates[end - 1]));
            }
            ++info.weeks_dropped;
            continue;
        }
        rows.push_back((growth.array() - 1.0).matrix() * 100.0);
        out.week_ends.push_back(panel.dates[end - 1]);
    }
    if (rows.empty()) throw DataError("every week has missing observations");
    if (rows.size() < 2) throw DataError("fewer than 2 complete weeks");

    out.returns.resize(static_cast<Eigen::Index>(rows.size()), n);
    for (std::size_t q = 0; q < rows.size(); ++q) out.returns.row(static_cast<Eigen::Index>(q)) = rows[q];

    info.first_week_days = weeks.front().second - weeks.front().first;
    info.last_week_days = weeks.back().second - weeks.back().first;
    if (summary) *summary = info;
    return out;
}

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string weekly_csv(const ReturnPanel& panel) {
    std::string out = "date";
    for (const auto& id : panel.asset_ids) out += "," + id;
    out += '\n';
    for (std::size_t q = 0; q < panel.weeks(); ++q) {
        out += format_date(panel.week_ends[q]);
        for (Eigen::Index j = 0; j < panel.returns.cols(); ++j) {
            out += ',';
            out += format_number(panel.returns(static_cast<Eigen::Index>(q), j));
        }
        out += '\n';
    }
    return out;
}

void write_weekly_csv(const ReturnPanel& panel, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << weekly_csv(panel);
}

ReturnPanel load_weekly_csv(const std::filesystem::path& path) {
    const DailyPanel raw = load_daily_csv(path, CsvLayout::plain);
    if (raw.returns.hasNaN()) throw DataError(path.string() + ": weekly cache contains missing cells");
    if (raw.rows() < 2) throw DataError(path.string() + ": fewer than 2 weeks");
    ReturnPanel out;
    out.week_ends = raw.dates;
    out.asset_ids = raw.asset_ids;
    out.returns = raw.returns;
    return out;
}

}  // namespace qrport
