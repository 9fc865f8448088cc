#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrport/backtest.hpp"

namespace qrport {

/// Writes report.json, oos_returns.csv, weights.csv, drifted_weights.csv,
/// diagnostics.csv, diagnostics.ndjson, wealth.csv and, for CV strategies,
/// cv_curves.csv into `dir`.
void write_report(const std::filesystem::path& dir, const BacktestReport& report, double initial_wealth);

/// Reads back the series stored by write_report (diagnostics excluded).
BacktestReport read_report(const std::filesystem::path& dir);

/// One table row; a statistic that cannot be computed is empty and explained in `notes`.
struct MetricRow {
    std::string label;
    std::optional<double> es, sd, sr, to, ap, sp;
    std::vector<std::string> notes;
};

MetricRow metric_row(const BacktestReport& report, double tau, double eta);

/// STRATEGY,ES,SD,SR,TO,AP,SP. decimals < 0 writes shortest round-trip values.
std::string metric_table_csv(const std::vector<MetricRow>& rows, int decimals);

/// Square matrix of p-values in percent with labelled rows and columns.
std::string pvalue_matrix_csv(const std::vector<std::string>& labels, const Eigen::MatrixXd& percent);

/// date plus one wealth column per report; all reports must share dates.
std::string wealth_table_csv(const std::vector<BacktestReport>& reports, double initial_wealth);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace qrport
