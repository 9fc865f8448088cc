#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qrport/data_ingest.hpp"
#include "qrport/run_config.hpp"

namespace qrport {

const char* version_string();

struct IngestRequest {
    std::filesystem::path input;
    std::filesystem::path output;
    CsvLayout layout = CsvLayout::plain;
    MissingPolicy missing = MissingPolicy::fail;
    std::optional<Date> start;
    std::optional<Date> end;
};

struct IngestResult {
    ReturnPanel panel;
    WeeklySummary summary;
};

/// Daily CSV to weekly panel, optionally cached to `request.output`.
IngestResult ingest(const IngestRequest& request);

/// Loads one dataset of `config` in its configured format.
IngestResult load_dataset(const RunConfig& config, const std::filesystem::path& path);

/// Runs every (dataset, T, strategy) cell and writes the output tree under
/// config.out. A failing cell is recorded in manifest.json and the run
/// continues. Returns the exit code of the first failing cell, or 0.
int cmd_backtest(const RunConfig& config, const std::atomic<bool>* abort, std::ostream& log);

/// Pairwise variance and Sharpe p-value matrices (percent) over report dirs.
/// Reports are grouped by window length; two window lengths with identical
/// strategy lists additionally give a combined matrix with the shorter
/// window above the diagonal. Returns the files written.
std::vector<std::filesystem::path> cmd_compare(const std::vector<std::filesystem::path>& report_dirs,
                                               const RunConfig& config, const std::filesystem::path& out_dir);

/// Rebuilds table.csv, metrics.csv and wealth.csv from report dirs that
/// share a window length.
std::vector<std::filesystem::path> cmd_report(const std::vector<std::filesystem::path>& report_dirs,
                                              const RunConfig& config, const std::filesystem::path& out_dir);

/// Report directories directly below `root` or anywhere beneath it.
std::vector<std::filesystem::path> find_report_dirs(const std::filesystem::path& root);

}  // namespace qrport
