#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qrport {

using Date = std::chrono::year_month_day;

/// Parses YYYYMMDD or YYYY-MM-DD. Returns nullopt on anything else.
std::optional<Date> parse_date(std::string_view text);

/// YYYY-MM-DD.
std::string format_date(const Date& d);

/// Monday of the ISO-8601 week containing `d`; two dates share an ISO
/// week exactly when their keys are equal.
std::chrono::sys_days iso_week_key(const Date& d);

/// Daily simple returns in percent. Missing cells hold quiet NaN.
struct DailyPanel {
    std::vector<Date> dates;
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd returns;  // T_d x N

    std::size_t rows() const { return dates.size(); }
    std::size_t assets() const { return asset_ids.size(); }
    bool is_missing(Eigen::Index t, Eigen::Index j) const;
};

/// Weekly simple returns in percent, stamped by each week's last trading day.
struct ReturnPanel {
    std::vector<Date> week_ends;
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd returns;  // Q x N

    std::size_t weeks() const { return week_ends.size(); }
    std::size_t assets() const { return asset_ids.size(); }
};

enum class CsvLayout {
    plain,   ///< one header row, then date + numeric columns
    french,  ///< Kenneth French library file: preamble, then the first data block
};

enum class MissingPolicy { fail, drop_week };

CsvLayout parse_layout(std::string_view tag);
MissingPolicy parse_missing_policy(std::string_view tag);

/// Sentinel codes used by the French library for missing observations.
bool is_sentinel(double value);

DailyPanel load_daily_csv(const std::filesystem::path& path, CsvLayout layout);
DailyPanel parse_daily_csv(std::string_view text, CsvLayout layout);

/// Checks strictly increasing dates, N >= 2 and a rectangular body.
void validate(const DailyPanel& panel);

/// Keeps rows with first <= date <= last (either bound optional).
DailyPanel restrict_dates(const DailyPanel& panel, std::optional<Date> first,
                          std::optional<Date> last);

struct WeeklySummary {
    std::size_t weeks_dropped = 0;
    std::size_t first_week_days = 0;
    std::size_t last_week_days = 0;
};

/// Compounds daily returns within each ISO week:
/// weekly = (prod(1 + r_d / 100) - 1) * 100.
ReturnPanel to_weekly(const DailyPanel& panel, MissingPolicy policy,
                      WeeklySummary* summary = nullptr);

/// Same layout as the plain daily CSV; values use shortest round-trip form.
std::string weekly_csv(const ReturnPanel& panel);
void write_weekly_csv(const ReturnPanel& panel, const std::filesystem::path& path);

/// Reads a cached weekly panel (plain layout, no missing cells allowed).
ReturnPanel load_weekly_csv(const std::filesystem::path& path);

/// Shortest decimal string that round-trips to the same double.
std::string format_number(double value);

}  // namespace qrport
