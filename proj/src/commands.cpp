#include "qrport/commands.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "qrport/backtest.hpp"
#include "qrport/errors.hpp"
#include "qrport/metrics.hpp"
#include "qrport/report_io.hpp"
#include "qrport/rng.hpp"
#include "qrport/stats.hpp"

namespace qrport {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using json = nlohmann::ordered_json;

const char* version_string() { return QRPORT_VERSION; }

namespace {

std::optional<Date> optional_date(const std::string& text, const char* key) {
    if (text.empty()) return std::nullopt;
    const auto d = parse_date(text);
    if (!d) throw UsageError(std::string(key) + " is not a valid date: " + text);
    return d;
}

ExitCode exit_code_of(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const Interrupted&) {
        return ExitCode::interrupted;
    } catch (const UsageError&) {
        return ExitCode::usage;
    } catch (const DataError&) {
        return ExitCode::data;
    } catch (...) {
        return ExitCode::numerical;
    }
}

std::string message_of(const std::exception_ptr& error) {
    try {
        std::rethrow_exception(error);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

std::size_t label_rank(const std::string& label) {
    const auto& labels = strategy_labels();
    const auto it = std::find(labels.begin(), labels.end(), label);
    return static_cast<std::size_t>(it - labels.begin());
}

void sort_by_table_order(std::vector<BacktestReport>& reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const BacktestReport& a, const BacktestReport& b) {
        return label_rank(a.label) < label_rank(b.label);
    });
}

std::map<Index, std::vector<BacktestReport>> group_by_window(const std::vector<fs::path>& dirs) {
    if (dirs.empty()) throw UsageError("no report directories given");
    std::map<Index, std::vector<BacktestReport>> groups;
    for (const auto& dir : dirs) {
        BacktestReport r = read_report(dir);
        groups[r.window].push_back(std::move(r));
    }
    for (auto& [window, reports] : groups) {
        sort_by_table_order(reports);
        std::set<std::string> seen;
        for (const auto& r : reports) {
            if (!seen.insert(r.label).second) {
                throw UsageError("strategy " + r.label + " appears twice for T=" + std::to_string(window));
            }
            if (r.oos_returns.size() != reports.front().oos_returns.size()) {
                throw DataError("return series lengths differ for T=" + std::to_string(window) + ": " +
                                reports.front().label + " has " + std::to_string(reports.front().oos_returns.size()) +
                                ", " + r.label + " has " + std::to_string(r.oos_returns.size()));
            }
            if (r.oos_dates != reports.front().oos_dates) {
                throw DataError("reports for T=" + std::to_string(window) + " cover different weeks");
            }
        }
    }
    return groups;
}

std::vector<MetricRow> metric_rows(const std::vector<BacktestReport>& reports, const RunConfig& config) {
    std::vector<MetricRow> rows;
    for (const auto& r : reports) rows.push_back(metric_row(r, config.tau, config.eta));
    return rows;
}

void write_tables(const fs::path& dir, const std::vector<MetricRow>& rows, const std::vector<BacktestReport>& reports,
                  double initial_wealth, std::vector<fs::path>* written) {
    fs::create_directories(dir);
    write_text(dir / "table.csv", metric_table_csv(rows, 3));
    write_text(dir / "metrics.csv", metric_table_csv(rows, -1));
    write_text(dir / "wealth.csv", wealth_table_csv(reports, initial_wealth));
    if (written) {
        for (const char* name : {"table.csv", "metrics.csv", "wealth.csv"}) written->push_back(dir / name);
    }
}

json ingest_summary(const IngestResult& data) {
    const ReturnPanel& p = data.panel;
    return {{"weeks", p.weeks()},
            {"assets", p.assets()},
            {"first_week_end", p.weeks() ? format_date(p.week_ends.front()) : ""},
            {"last_week_end", p.weeks() ? format_date(p.week_ends.back()) : ""},
            {"first_week_trading_days", data.summary.first_week_days},
            {"last_week_trading_days", data.summary.last_week_days},
            {"weeks_dropped", data.summary.weeks_dropped}};
}

json conventions(const RunConfig& config) {
    return {
        {"week", "ISO-8601 weeks stamped by their last trading day; partial first and last weeks are kept"},
        {"returns", "simple returns in percent"},
        {"quantile", "type-1 empirical quantile: the ceil(tau n)-th order statistic"},
        {"var_tau", "type-1 tau-quantile of the out-of-sample returns"},
        {"expected_shortfall", "negative mean of returns strictly below VaR"},
        {"lambda_scale", "check loss is summed over observations; LASSO weights are sd_j sqrt(tau(1-tau))/T"},
        {"bic_c_t", config.bic_ct == 0.0 ? "log T" : format_number(config.bic_ct)},
        {"window_seed", "splitmix64 derivation from (seed, window index, strategy label)"},
        {"bch_stream", "substream 0 of the window seed"},
        {"cv_fold_stream", "substream 1 of the window seed"},
        {"lw_pair_seed", "derivation from (lw_seed, T, sorted label pair)"},
        {"table_columns", "ES, SD and SR in percent; TO is mean L1 rebalance; AP and SP are mean counts with |w| > eta"},
    };
}

}  // namespace

IngestResult ingest(const IngestRequest& request) {
    DailyPanel daily = load_daily_csv(request.input, request.layout);
    if (request.start || request.end) daily = restrict_dates(daily, request.start, request.end);
    validate(daily);
    IngestResult result;
    result.panel = to_weekly(daily, request.missing, &result.summary);
    if (!request.output.empty()) {
        if (request.output.has_parent_path()) fs::create_directories(request.output.parent_path());
        write_weekly_csv(result.panel, request.output);
    }
    return result;
}

IngestResult load_dataset(const RunConfig& config, const fs::path& path) {
    const auto start = optional_date(config.start, "start");
    const auto end = optional_date(config.end, "end");
    if (config.data_format != "weekly") {
        IngestRequest request;
        request.input = path;
        request.layout = parse_layout(config.data_format);
        request.missing = parse_missing_policy(config.missing);
        request.start = start;
        request.end = end;
        return ingest(request);
    }
    IngestResult result;
    ReturnPanel full = load_weekly_csv(path);
    if (!start && !end) {
        result.panel = std::move(full);
        return result;
    }
    result.panel.asset_ids = full.asset_ids;
    std::vector<Index> keep;
    for (std::size_t k = 0; k < full.weeks(); ++k) {
        const Date d = full.week_ends[k];
        if ((start && d < *start) || (end && d > *end)) continue;
        keep.push_back(static_cast<Index>(k));
        result.panel.week_ends.push_back(d);
    }
    result.panel.returns = full.returns(keep, Eigen::all);
    if (result.panel.weeks() < 2) throw DataError(path.string() + ": fewer than 2 weeks inside the date range");
    return result;
}

int cmd_backtest(const RunConfig& config, const std::atomic<bool>* abort, std::ostream& log) {
    config.validate();
    if (config.data.empty()) throw UsageError("no data files given");
    std::set<std::string> names;
    for (const auto& d : config.data) {
        if (!names.insert(fs::path(d).stem().string()).second) {
            throw UsageError("two data files share the name " + fs::path(d).stem().string());
        }
    }
    const fs::path out = config.out;
    fs::create_directories(out);
    write_text(out / "config.txt", format_config(config));

    json manifest;
    manifest["program"] = "qrport";
    manifest["version"] = version_string();
    manifest["seed"] = config.seed;
    json config_echo = json::object();
    for (const auto& [key, value] : config.entries()) config_echo[key] = value;
    manifest["config"] = config_echo;
    manifest["conventions"] = conventions(config);
    manifest["datasets"] = json::array();
    manifest["cells"] = json::array();

    int first_failure = 0;
    auto note_failure = [&](ExitCode code) {
        if (first_failure == 0) first_failure = static_cast<int>(code);
    };
    auto flush_manifest = [&] { write_text(out / "manifest.json", manifest.dump(2) + "\n"); };

    const unsigned threads = config.resolved_threads();
    for (const auto& data_path : config.data) {
        const std::string name = fs::path(data_path).stem().string();
        json dataset = {{"name", name}, {"path", data_path}, {"format", config.data_format}};
        IngestResult data;
        try {
            data = load_dataset(config, data_path);
            dataset["summary"] = ingest_summary(data);
            dataset["status"] = "ok";
        } catch (...) {
            const auto e = std::current_exception();
            const ExitCode code = exit_code_of(e);
            dataset["status"] = "failed";
            dataset["error"] = message_of(e);
            manifest["datasets"].push_back(dataset);
            log << name << ": " << message_of(e) << "\n";
            note_failure(code);
            for (int window : config.windows) {
                for (const auto& label : config.strategies) {
                    manifest["cells"].push_back({{"dataset", name},
                                                 {"window", window},
                                                 {"strategy", label},
                                                 {"status", "failed"},
                                                 {"exit_code", static_cast<int>(code)},
                                                 {"error", "dataset could not be loaded"}});
                }
            }
            continue;
        }
        manifest["datasets"].push_back(dataset);

        for (int window : config.windows) {
            const fs::path cell_root = out / name / ("T" + std::to_string(window));
            std::vector<MetricRow> rows;
            std::vector<BacktestReport> reports;
            for (const auto& label : config.strategies) {
                json cell = {{"dataset", name}, {"window", window}, {"strategy", label}};
                const auto started = std::chrono::steady_clock::now();
                try {
                    RollOptions options;
                    options.threads = threads;
                    options.seed = config.seed;
                    options.abort = abort;
                    BacktestReport report = roll(data.panel, window, config.strategy(label), options);
                    const fs::path dir = cell_root / label;
                    write_report(dir, report, config.initial_wealth);
                    MetricRow row = metric_row(report, config.tau, config.eta);
                    json runtimes = json::array();
                    for (const auto& d : report.diagnostics) runtimes.push_back(d.runtime_seconds);
                    cell["status"] = "ok";
                    cell["report"] = fs::relative(dir, out).generic_string();
                    cell["windows"] = report.diagnostics.size();
                    cell["metric_notes"] = row.notes;
                    cell["window_runtime_seconds"] = runtimes;
                    rows.push_back(std::move(row));
                    reports.push_back(std::move(report));
                } catch (const Interrupted& e) {
                    cell["status"] = "interrupted";
                    cell["error"] = e.what();
                    manifest["cells"].push_back(cell);
                    manifest["interrupted"] = true;
                    flush_manifest();
                    throw;
                } catch (...) {
                    const auto e = std::current_exception();
                    const ExitCode code = exit_code_of(e);
                    cell["status"] = "failed";
                    cell["exit_code"] = static_cast<int>(code);
                    cell["error"] = message_of(e);
                    note_failure(code);
                    MetricRow row;
                    row.label = label;
                    row.notes.push_back(message_of(e));
                    rows.push_back(std::move(row));
                }
                cell["elapsed_seconds"] =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
                log << name << " T=" << window << " " << label << ": " << cell["status"].get<std::string>();
                if (cell.contains("error")) log << " (" << cell["error"].get<std::string>() << ")";
                log << "\n";
                manifest["cells"].push_back(cell);
            }
            std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
                return label_rank(a.label) < label_rank(b.label);
            });
            sort_by_table_order(reports);
            write_tables(cell_root, rows, reports, config.initial_wealth, nullptr);
            flush_manifest();
        }
    }
    manifest["interrupted"] = false;
    flush_manifest();
    return first_failure;
}

std::vector<fs::path> cmd_compare(const std::vector<fs::path>& report_dirs, const RunConfig& config,
                                  const fs::path& out_dir) {
    const auto groups = group_by_window(report_dirs);
    fs::create_directories(out_dir);
    std::vector<fs::path> written;

    LwOptions base;
    base.draws = config.lw_draws;
    base.block_length = config.lw_block;

    struct Matrices {
        std::vector<std::string> labels;
        MatrixXd variance, sharpe;
    };
    std::map<Index, Matrices> results;
    json details = {{"draws", config.lw_draws}, {"block_length", config.lw_block}, {"seed", config.lw_seed},
                    {"pairs", json::array()}};

    for (const auto& [window, reports] : groups) {
        const Index n = static_cast<Index>(reports.size());
        Matrices m;
        for (const auto& r : reports) m.labels.push_back(r.label);
        m.variance = MatrixXd::Constant(n, n, 100.0);
        m.sharpe = MatrixXd::Constant(n, n, 100.0);
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) {
                const auto& a = reports[static_cast<std::size_t>(i)];
                const auto& b = reports[static_cast<std::size_t>(j)];
                LwOptions options = base;
                const std::string pair = std::min(a.label, b.label) + "|" + std::max(a.label, b.label);
                options.seed = derive_seed(config.lw_seed, static_cast<std::uint64_t>(window), pair);
                const auto ra = as_span(a.oos_returns);
                const auto rb = as_span(b.oos_returns);
                const LwTestResult v = lw_variance_test(ra, rb, options);
                const LwTestResult s = lw_sharpe_test(ra, rb, options);
                m.variance(i, j) = m.variance(j, i) = 100.0 * v.p_value;
                m.sharpe(i, j) = m.sharpe(j, i) = 100.0 * s.p_value;
                for (const LwTestResult* t : {&v, &s}) {
                    details["pairs"].push_back({{"window", window},
                                                {"first", a.label},
                                                {"second", b.label},
                                                {"test", to_string(t->kind)},
                                                {"statistic", t->statistic},
                                                {"standard_error", t->standard_error},
                                                {"p_value", t->p_value}});
                }
            }
        }
        const std::string suffix = "_T" + std::to_string(window) + ".csv";
        written.push_back(out_dir / ("pvalues_variance" + suffix));
        write_text(written.back(), pvalue_matrix_csv(m.labels, m.variance));
        written.push_back(out_dir / ("pvalues_sharpe" + suffix));
        write_text(written.back(), pvalue_matrix_csv(m.labels, m.sharpe));
        results.emplace(window, std::move(m));
    }

    if (results.size() == 2 && results.begin()->second.labels == results.rbegin()->second.labels) {
        const Matrices& small = results.begin()->second;
        const Matrices& large = results.rbegin()->second;
        auto combine = [&](const MatrixXd& upper, const MatrixXd& lower) {
            MatrixXd c = lower.triangularView<Eigen::StrictlyLower>();
            c += upper.triangularView<Eigen::StrictlyUpper>();
            c.diagonal().setConstant(std::numeric_limits<double>::quiet_NaN());
            return c;
        };
        written.push_back(out_dir / "pvalues_variance_combined.csv");
        write_text(written.back(), pvalue_matrix_csv(small.labels, combine(small.variance, large.variance)));
        written.push_back(out_dir / "pvalues_sharpe_combined.csv");
        write_text(written.back(), pvalue_matrix_csv(small.labels, combine(small.sharpe, large.sharpe)));
    }
    written.push_back(out_dir / "compare.json");
    write_text(written.back(), details.dump(2) + "\n");
    return written;
}

std::vector<fs::path> cmd_report(const std::vector<fs::path>& report_dirs, const RunConfig& config,
                                 const fs::path& out_dir) {
    const auto groups = group_by_window(report_dirs);
    std::vector<fs::path> written;
    for (const auto& [window, reports] : groups) {
        const fs::path dir = groups.size() == 1 ? out_dir : out_dir / ("T" + std::to_string(window));
        write_tables(dir, metric_rows(reports, config), reports, config.initial_wealth, &written);
    }
    return written;
}

std::vector<fs::path> find_report_dirs(const fs::path& root) {
    if (!fs::exists(root)) throw UsageError("no such directory: " + root.string());
    if (fs::exists(root / "report.json")) return {root};
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "report.json") dirs.push_back(entry.path().parent_path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw UsageError("no reports found under " + root.string());
    return dirs;
}

}  // namespace qrport
