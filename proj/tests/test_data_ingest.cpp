#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <doctest.h>

#include "qrport/data_ingest.hpp"
#include "qrport/errors.hpp"

using namespace qrport;
using namespace std::chrono;

namespace {

std::string weekday_csv(Date first, Date last, int assets, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.05, 1.0);
    std::string text = "Date";
    for (int j = 0; j < assets; ++j) text += ",A" + std::to_string(j);
    text += "\n";
    for (sys_days d{first}; d <= sys_days{last}; d += days{1}) {
        if (weekday{d}.iso_encoding() > 5) continue;
        const Date ymd{d};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()));
        text += buf;
        for (int j = 0; j < assets; ++j) text += "," + format_number(std::round(n(rng) * 100.0) / 100.0);
        text += "\n";
    }
    return text;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qrport_ingest_" + name);
}

}  // namespace

TEST_CASE("dates parse in both forms and reject nonsense") {
    CHECK(format_date(*parse_date("20190426")) == "2019-04-26");
    CHECK(format_date(*parse_date("2019-04-26")) == "2019-04-26");
    CHECK_FALSE(parse_date("2019-02-30"));
    CHECK_FALSE(parse_date("2019426"));
    CHECK_FALSE(parse_date("abcdefgh"));
}

TEST_CASE("three-row file echoes into a daily panel") {
    const DailyPanel p = parse_daily_csv("Date,X,Y\n20200106,1.5,-2\n20200107,0,0.25\n20200108,3,4\n", CsvLayout::plain);
    CHECK(p.rows() == 3);
    CHECK(p.assets() == 2);
    CHECK(p.asset_ids[1] == "Y");
    CHECK(p.returns(0, 1) == -2.0);
    CHECK(p.returns(1, 1) == 0.25);
}

TEST_CASE("sentinel codes become missing cells") {
    const DailyPanel p =
        parse_daily_csv("Date,X,Y\n20200106,-99.99,1\n20200107,2,-999\n20200108,-99.98,1\n", CsvLayout::plain);
    CHECK(p.is_missing(0, 0));
    CHECK(p.is_missing(1, 1));
    CHECK_FALSE(p.is_missing(2, 0));
    CHECK(p.returns(2, 0) == -99.98);
}

TEST_CASE("duplicated or decreasing dates fail validation") {
    CHECK_THROWS_AS(parse_daily_csv("Date,X,Y\n20200106,1,1\n20200106,2,2\n", CsvLayout::plain), DataError);
    CHECK_THROWS_AS(parse_daily_csv("Date,X,Y\n20200107,1,1\n20200106,2,2\n", CsvLayout::plain), DataError);
    CHECK_THROWS_AS(parse_daily_csv("Date,X\n20200106,1\n", CsvLayout::plain), DataError);
}

TEST_CASE("malformed rows report their line number") {
    try {
        parse_daily_csv("Date,X,Y\n20200106,1,1\n\n20200107,2,oops\n", CsvLayout::plain);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("oops") != std::string::npos);
    }
    try {
        parse_daily_csv("Date,X,Y\n20200106,1\n", CsvLayout::plain);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_daily_csv("Date,X,Y\n2020-13-01,1,1\n", CsvLayout::plain), ParseError);
}

TEST_CASE("weekly compounding of simple cases") {
    // Mon 2020-01-06 and Tue 2020-01-07 share an ISO week; the next week is all zeros.
    const DailyPanel d = parse_daily_csv(
        "Date,X,Y\n20200106,1,0\n20200107,1,0\n20200113,0,0\n20200114,0,0\n20200115,0,0\n20200116,0,0\n20200117,0,0\n",
        CsvLayout::plain);
    const ReturnPanel w = to_weekly(d, MissingPolicy::fail);
    REQUIRE(w.weeks() == 2);
    CHECK(w.returns(0, 0) == doctest::Approx(2.01).epsilon(1e-14));
    CHECK(w.returns(0, 1) == 0.0);
    CHECK(w.returns(1, 0) == 0.0);
    CHECK(format_date(w.week_ends[0]) == "2020-01-07");
    CHECK(format_date(w.week_ends[1]) == "2020-01-17");
}

TEST_CASE("ISO weeks span year ends") {
    // Tue 2019-12-31 and Thu 2020-01-02 are both in ISO week 2020-W01.
    const DailyPanel d =
        parse_daily_csv("Date,X,Y\n20191227,1,1\n20191231,1,1\n20200102,1,1\n20200106,1,1\n", CsvLayout::plain);
    const ReturnPanel w = to_weekly(d, MissingPolicy::fail);
    REQUIRE(w.weeks() == 3);
    CHECK(format_date(w.week_ends[1]) == "2020-01-02");
}

TEST_CASE("missing data policies") {
    const std::string text = "Date,X,Y\n20200106,1,1\n20200113,-99.99,1\n20200120,1,1\n20200127,2,2\n";
    const DailyPanel d = parse_daily_csv(text, CsvLayout::plain);
    CHECK_THROWS_AS(to_weekly(d, MissingPolicy::fail), DataError);
    WeeklySummary s;
    const ReturnPanel w = to_weekly(d, MissingPolicy::drop_week, &s);
    CHECK(w.weeks() == 3);
    CHECK(s.weeks_dropped == 1);
    CHECK(format_date(w.week_ends[1]) == "2020-01-20");
    const DailyPanel all_missing = parse_daily_csv("Date,X,Y\n20200106,-999,1\n20200113,-999,1\n", CsvLayout::plain);
    CHECK_THROWS_AS(to_weekly(all_missing, MissingPolicy::drop_week), DataError);
    CHECK(parse_missing_policy("drop-week") == MissingPolicy::drop_week);
    CHECK_THROWS_AS(parse_missing_policy("impute"), UsageError);
}

TEST_CASE("compounding identity and column permutation on a long panel") {
    const DailyPanel d = parse_daily_csv(weekday_csv(2015y / 3 / 4, 2016y / 8 / 19, 4, 11), CsvLayout::plain);
    const ReturnPanel w = to_weekly(d, MissingPolicy::fail);
    std::size_t t = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < w.weeks(); ++k) {
        Eigen::ArrayXd prod = Eigen::ArrayXd::Ones(4);
        while (t < d.rows() && iso_week_key(d.dates[t]) == iso_week_key(w.week_ends[k])) {
            prod *= 1.0 + d.returns.row(static_cast<Eigen::Index>(t)).transpose().array() / 100.0;
            ++t;
        }
        const Eigen::ArrayXd lhs = 1.0 + w.returns.row(static_cast<Eigen::Index>(k)).transpose().array() / 100.0;
        worst = std::max(worst, ((lhs - prod).abs() / prod.abs()).maxCoeff());
    }
    CHECK(t == d.rows());
    CHECK(worst <= 1e-12);
    for (std::size_t k = 1; k < w.weeks(); ++k) CHECK(w.week_ends[k - 1] < w.week_ends[k]);

    DailyPanel perm = d;
    const std::vector<int> order = {2, 0, 3, 1};
    for (int j = 0; j < 4; ++j) {
        perm.returns.col(j) = d.returns.col(order[static_cast<std::size_t>(j)]);
        perm.asset_ids[static_cast<std::size_t>(j)] = d.asset_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    }
    const ReturnPanel wp = to_weekly(perm, MissingPolicy::fail);
    for (int j = 0; j < 4; ++j) CHECK(wp.returns.col(j) == w.returns.col(order[static_cast<std::size_t>(j)]));
}

TEST_CASE("weekday calendar over the study interval gives 1006 weeks") {
    // The first listed Friday is the base close, so daily data starts the following Monday.
    const DailyPanel d = parse_daily_csv(weekday_csv(2000y / 1 / 17, 2019y / 4 / 26, 2, 3), CsvLayout::plain);
    const ReturnPanel w = to_weekly(d, MissingPolicy::fail);
    CHECK(w.weeks() == 1006);
    CHECK(format_date(w.week_ends.front()) == "2000-01-21");
    CHECK(format_date(w.week_ends.back()) == "2019-04-26");
    const DailyPanel wider = parse_daily_csv(weekday_csv(2000y / 1 / 10, 2019y / 4 / 26, 2, 3), CsvLayout::plain);
    const ReturnPanel clipped = to_weekly(restrict_dates(wider, Date{2000y / 1 / 15}, Date{2019y / 4 / 26}), MissingPolicy::fail);
    CHECK(clipped.weeks() == 1006);
    CHECK(to_weekly(wider, MissingPolicy::fail).weeks() == 1007);
}

TEST_CASE("french library layout reads the first block only") {
    const std::string text =
        "This file was created using the 202012 CRSP database.\n"
        "  Average Value Weighted Returns -- Daily\n"
        ",Agric,Food ,Soda \n"
        "20200106,   0.10,  -0.20,  -99.99\n"
        "20200107,   0.30,   0.40,   0.50\n"
        "\n"
        "  Average Equal Weighted Returns -- Daily\n"
        ",Agric,Food ,Soda \n"
        "20200106,   9.00,   9.00,   9.00\n";
    const DailyPanel p = parse_daily_csv(text, CsvLayout::french);
    CHECK(p.rows() == 2);
    REQUIRE(p.assets() == 3);
    CHECK(p.asset_ids[1] == "Food");
    CHECK(p.returns(1, 2) == 0.5);
    CHECK(p.is_missing(0, 2));
    CHECK_THROWS_AS(parse_daily_csv("no header here\n1,2\n", CsvLayout::french), ParseError);
}

TEST_CASE("weekly cache round-trips exactly and is byte-stable") {
    const DailyPanel d = parse_daily_csv(weekday_csv(2018y / 1 / 1, 2018y / 12 / 31, 3, 5), CsvLayout::plain);
    const ReturnPanel w = to_weekly(d, MissingPolicy::fail);
    const auto path = temp_file("cache.csv");
    write_weekly_csv(w, path);
    const ReturnPanel back = load_weekly_csv(path);
    CHECK(back.week_ends == w.week_ends);
    CHECK(back.asset_ids == w.asset_ids);
    CHECK(back.returns == w.returns);
    CHECK(weekly_csv(back) == weekly_csv(w));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_daily_csv(temp_file("does_not_exist.csv"), CsvLayout::plain), DataError);
}

TEST_CASE("shortest round-trip number formatting") {
    for (double v : {0.1, -2.5, 1e-5, 123456.789, 2.0 / 3.0, -0.0}) {
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(0.1) == "0.1");
}
