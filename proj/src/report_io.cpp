#include "qrport/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qrport/errors.hpp"
#include "qrport/stats.hpp"

namespace qrport {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string matrix_csv(const std::vector<Date>& dates, const std::vector<std::string>& ids, const MatrixXd& m) {
    std::string out = "date";
    for (const auto& id : ids) out += "," + id;
    out += "\n";
    for (Index k = 0; k < m.rows(); ++k) {
        out += format_date(dates[static_cast<std::size_t>(k)]);
        for (Index j = 0; j < m.cols(); ++j) out += "," + format_number(m(k, j));
        out += "\n";
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<Date> dates;
    MatrixXd values;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, const fs::path& path, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) throw ParseError("bad number in " + path.string(), line);
    return v;
}

Table read_table(const fs::path& path) {
    std::istringstream in(read_text(path));
    Table t;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != t.header.size() + 1) throw ParseError("wrong column count in " + path.string(), line_no);
        const auto date = parse_date(cells[0]);
        if (!date) throw ParseError("bad date in " + path.string(), line_no);
        t.dates.push_back(*date);
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_cell(cells[c], path, line_no));
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return t;
}

std::string fixed(double v, int decimals) {
    if (decimals < 0) return format_number(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.000"
    return s;
}

}  // namespace

void write_report(const fs::path& dir, const BacktestReport& report, double initial_wealth) {
    fs::create_directories(dir);
    const json meta = {{"label", report.label},
                       {"window", report.window},
                       {"start_date", format_date(report.start_date)},
                       {"assets", report.asset_ids},
                       {"oos_weeks", report.oos_returns.size()}};
    write_text(dir / "report.json", meta.dump(2) + "\n");

    std::string oos = "date,return\n";
    for (Index k = 0; k < report.oos_returns.size(); ++k) {
        oos += format_date(report.oos_dates[static_cast<std::size_t>(k)]) + "," + format_number(report.oos_returns(k)) + "\n";
    }
    write_text(dir / "oos_returns.csv", oos);
    write_text(dir / "weights.csv", matrix_csv(report.oos_dates, report.asset_ids, report.weight_history));
    // Drifted row k is the holding just before the rebalance stamped oos_dates[k + 1].
    const std::vector<Date> drift_dates(report.oos_dates.begin() + (report.oos_dates.empty() ? 0 : 1),
                                        report.oos_dates.end());
    write_text(dir / "drifted_weights.csv", matrix_csv(drift_dates, report.asset_ids, report.drifted_weights));

    const VectorXd wealth = wealth_curve(report.oos_returns, initial_wealth);
    std::string w = "date,wealth\n" + format_date(report.start_date) + "," + format_number(wealth(0)) + "\n";
    for (Index k = 0; k < report.oos_returns.size(); ++k) {
        w += format_date(report.oos_dates[static_cast<std::size_t>(k)]) + "," + format_number(wealth(k + 1)) + "\n";
    }
    write_text(dir / "wealth.csv", w);

    std::string diag = "window,date,reference,lambda,selected,support,iterations,lla_steps,converged\n";
    std::string ndjson;
    std::string curves;
    for (std::size_t k = 0; k < report.diagnostics.size(); ++k) {
        const WindowDiagnostics& d = report.diagnostics[k];
        Index support = 0;
        for (Index j = 0; j < report.weight_history.cols(); ++j) {
            support += std::abs(report.weight_history(static_cast<Index>(k), j)) > 0.0 ? 1 : 0;
        }
        const std::string ref = d.reference_index >= 0 ? report.asset_ids[static_cast<std::size_t>(d.reference_index)] : "";
        diag += std::to_string(k) + "," + format_date(report.oos_dates[k]) + "," + ref + "," + format_number(d.lambda) +
                "," + std::to_string(d.selected) + "," + std::to_string(support) + "," + std::to_string(d.iterations) +
                "," + std::to_string(d.lla_steps) + "," + (d.converged ? "1" : "0") + "\n";
        json line = {{"window", k},
                     {"date", format_date(report.oos_dates[k])},
                     {"reference", ref},
                     {"lambda", d.lambda},
                     {"selected", d.selected},
                     {"iterations", d.iterations},
                     {"lla_steps", d.lla_steps},
                     {"converged", d.converged},
                     {"runtime_seconds", d.runtime_seconds}};
        ndjson += line.dump() + "\n";
        for (std::size_t g = 0; g < d.cv_grid.size(); ++g) {
            curves += std::to_string(k) + "," + std::to_string(g) + "," + format_number(d.cv_grid[g]) + "," +
                      (std::isfinite(d.cv_curve[g]) ? format_number(d.cv_curve[g]) : std::string("NA")) + "\n";
        }
    }
    write_text(dir / "diagnostics.csv", diag);
    write_text(dir / "diagnostics.ndjson", ndjson);
    if (!curves.empty()) write_text(dir / "cv_curves.csv", "window,grid_index,lambda,mean_loss\n" + curves);
}

BacktestReport read_report(const fs::path& dir) {
    BacktestReport r;
    json meta;
    try {
        meta = json::parse(read_text(dir / "report.json"));
        r.label = meta.at("label").get<std::string>();
        r.window = meta.at("window").get<Index>();
        r.asset_ids = meta.at("assets").get<std::vector<std::string>>();
        const auto start = parse_date(meta.at("start_date").get<std::string>());
        if (!start) throw DataError("bad start_date");
        r.start_date = *start;
    } catch (const json::exception& e) {
        throw DataError("malformed " + (dir / "report.json").string() + ": " + e.what());
    }
    const Table oos = read_table(dir / "oos_returns.csv");
    const Table weights = read_table(dir / "weights.csv");
    const Table drifted = read_table(dir / "drifted_weights.csv");
    if (oos.values.cols() != 1) throw DataError("oos_returns.csv must have one value column");
    if (weights.header != r.asset_ids || drifted.header != r.asset_ids) {
        throw DataError("weight files in " + dir.string() + " do not match the report assets");
    }
    if (weights.dates != oos.dates || drifted.values.rows() + 1 != oos.values.rows()) {
        throw DataError("series in " + dir.string() + " are misaligned");
    }
    r.oos_dates = oos.dates;
    r.oos_returns = oos.values.col(0);
    r.weight_history = weights.values;
    r.drifted_weights = drifted.values;
    return r;
}

MetricRow metric_row(const BacktestReport& report, double tau, double eta) {
    MetricRow row;
    row.label = report.label;
    const std::span<const double> r{report.oos_returns.data(), static_cast<std::size_t>(report.oos_returns.size())};
    auto attempt = [&](const char* name, std::optional<double>& slot, auto&& fn) {
        try {
            slot = fn();
        } catch (const std::exception& e) {
            row.notes.push_back(std::string(name) + ": " + e.what());
        }
    };
    attempt("ES", row.es, [&] { return expected_shortfall(r, tau); });
    attempt("SD", row.sd, [&] { return sample_sd(r); });
    attempt("SR", row.sr, [&] { return sharpe(r); });
    attempt("TO", row.to, [&] { return turnover(report.weight_history, report.drifted_weights); });
    attempt("AP", row.ap, [&] { return active_short_positions(report.weight_history, eta).active; });
    attempt("SP", row.sp, [&] { return active_short_positions(report.weight_history, eta).short_positions; });
    return row;
}

std::string metric_table_csv(const std::vector<MetricRow>& rows, int decimals) {
    std::string out = "STRATEGY,ES,SD,SR,TO,AP,SP\n";
    auto cell = [&](const std::optional<double>& v) { return v ? fixed(*v, decimals) : std::string("NA"); };
    for (const MetricRow& r : rows) {
        out += r.label + "," + cell(r.es) + "," + cell(r.sd) + "," + cell(r.sr) + "," + cell(r.to) + "," + cell(r.ap) +
               "," + cell(r.sp) + "\n";
    }
    return out;
}

std::string pvalue_matrix_csv(const std::vector<std::string>& labels, const MatrixXd& percent) {
    std::string out = "STRATEGY";
    for (const auto& l : labels) out += "," + l;
    out += "\n";
    for (Index i = 0; i < percent.rows(); ++i) {
        out += labels[static_cast<std::size_t>(i)];
        for (Index j = 0; j < percent.cols(); ++j) {
            out += "," + (std::isfinite(percent(i, j)) ? fixed(percent(i, j), 3) : std::string("NA"));
        }
        out += "\n";
    }
    return out;
}

std::string wealth_table_csv(const std::vector<BacktestReport>& reports, double initial_wealth) {
    if (reports.empty()) return "date\n";
    const BacktestReport& first = reports.front();
    std::vector<VectorXd> curves;
    std::string out = "date";
    for (const auto& r : reports) {
        if (r.oos_dates != first.oos_dates) throw DataError("wealth table: reports cover different weeks");
        out += "," + r.label;
        curves.push_back(wealth_curve(r.oos_returns, initial_wealth));
    }
    out += "\n";
    for (std::size_t k = 0; k <= first.oos_dates.size(); ++k) {
        out += format_date(k == 0 ? first.start_date : first.oos_dates[k - 1]);
        for (const auto& c : curves) out += "," + format_number(c(static_cast<Index>(k)));
        out += "\n";
    }
    return out;
}

}  // namespace qrport
