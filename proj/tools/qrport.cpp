#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrport/commands.hpp"
#include "qrport/errors.hpp"
#include "qrport/run_config.hpp"

namespace {

std::atomic<bool> g_abort{false};

extern "C" void on_sigint(int) { g_abort.store(true); }

struct Overrides {
    std::map<std::string, std::string> scalars;
    std::vector<std::string> data;
    std::vector<std::string> windows;
    std::vector<std::string> assignments;  ///< key=value
    std::string config_path;
};

void add_scalar(CLI::App* app, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.scalars[key] = v; }, help);
}

void add_run_flags(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "key = value configuration file; flags override it");
    app->add_option("--data", o.data, "dataset file (repeatable)");
    app->add_option("--window", o.windows, "window length T (repeatable)");
    add_scalar(app, o, "--strategies", "strategies", "comma-separated strategy labels");
    add_scalar(app, o, "--tau", "tau", "quantile level");
    add_scalar(app, o, "--eta", "eta", "weight threshold for active positions");
    add_scalar(app, o, "--seed", "seed", "master seed");
    add_scalar(app, o, "--out", "out", "output directory");
    add_scalar(app, o, "--threads", "threads", "worker threads; 0 uses all cores");
    add_scalar(app, o, "--data-format", "data_format", "weekly, plain or french");
    add_scalar(app, o, "--missing", "missing", "missing-cell policy: fail or drop-week");
    add_scalar(app, o, "--start", "start", "first date to keep");
    add_scalar(app, o, "--end", "end", "last date to keep");
    app->add_option("--set", o.assignments, "any config key as key=value (repeatable)");
}

qrport::RunConfig build_config(const Overrides& o) {
    qrport::RunConfig config = o.config_path.empty() ? qrport::RunConfig{} : qrport::load_config(o.config_path);
    for (const auto& a : o.assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw qrport::UsageError("--set expects key=value, got '" + a + "'");
        config.set(a.substr(0, eq), a.substr(eq + 1));
    }
    for (const auto& [key, value] : o.scalars) config.set(key, value);
    if (!o.data.empty()) {
        config.data = o.data;
    }
    if (!o.windows.empty()) {
        std::string joined;
        for (const auto& w : o.windows) joined += (joined.empty() ? "" : ",") + w;
        config.set("windows", joined);
    }
    return config;
}

std::vector<std::filesystem::path> expand_reports(const std::vector<std::string>& roots) {
    std::vector<std::filesystem::path> dirs;
    for (const auto& r : roots) {
        for (auto& d : qrport::find_report_dirs(r)) dirs.push_back(std::move(d));
    }
    return dirs;
}

void print_written(const std::vector<std::filesystem::path>& files) {
    for (const auto& f : files) std::cout << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimum expected-shortfall portfolios from penalized quantile regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", qrport::version_string());

    std::string in_path, out_path, layout = "plain", missing = "fail", start, end;
    auto* ingest = app.add_subcommand("ingest", "compound a daily CSV to a weekly cache");
    ingest->add_option("--input,--data", in_path, "daily return CSV")->required();
    ingest->add_option("--output,--out", out_path, "weekly CSV to write")->required();
    ingest->add_option("--format", layout, "plain or french")->check(CLI::IsMember({"plain", "french"}));
    ingest->add_option("--missing", missing, "fail or drop-week");
    ingest->add_option("--start", start, "first date to keep");
    ingest->add_option("--end", end, "last date to keep");

    Overrides bt;
    auto* backtest = app.add_subcommand("backtest", "run the rolling-window backtest");
    add_run_flags(backtest, bt);

    Overrides cmp;
    std::vector<std::string> compare_dirs;
    std::string compare_out = "compare";
    auto* compare = app.add_subcommand("compare", "pairwise variance and Sharpe tests between reports");
    compare->add_option("reports", compare_dirs, "report directories or run roots")->required();
    compare->add_option("--out", compare_out, "output directory");
    compare->add_option("--config", cmp.config_path, "configuration file");
    add_scalar(compare, cmp, "--draws", "lw_draws", "bootstrap draws");
    add_scalar(compare, cmp, "--block", "lw_block", "bootstrap block length");
    add_scalar(compare, cmp, "--seed", "lw_seed", "bootstrap seed");
    compare->add_option("--set", cmp.assignments, "any config key as key=value");

    Overrides rep;
    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* report = app.add_subcommand("report", "rebuild metric and wealth tables from reports");
    report->add_option("reports", report_dirs, "report directories or run roots")->required();
    report->add_option("--out", report_out, "output directory");
    report->add_option("--config", rep.config_path, "configuration file");
    add_scalar(report, rep, "--tau", "tau", "quantile level");
    add_scalar(report, rep, "--eta", "eta", "weight threshold");
    report->add_option("--set", rep.assignments, "any config key as key=value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(qrport::ExitCode::usage);
    }

    try {
        if (*ingest) {
            qrport::IngestRequest request;
            request.input = in_path;
            request.output = out_path;
            request.layout = qrport::parse_layout(layout);
            request.missing = qrport::parse_missing_policy(missing);
            if (!start.empty()) request.start = qrport::parse_date(start);
            if (!end.empty()) request.end = qrport::parse_date(end);
            if ((!start.empty() && !request.start) || (!end.empty() && !request.end)) {
                throw qrport::UsageError("dates must be YYYYMMDD or YYYY-MM-DD");
            }
            const auto result = qrport::ingest(request);
            std::cerr << result.panel.weeks() << " weeks, " << result.panel.assets() << " assets -> " << out_path
                      << "\n";
            return 0;
        }
        if (*backtest) {
            const qrport::RunConfig config = build_config(bt);
            std::signal(SIGINT, on_sigint);
            return qrport::cmd_backtest(config, &g_abort, std::cerr);
        }
        if (*compare) {
            print_written(qrport::cmd_compare(expand_reports(compare_dirs), build_config(cmp), compare_out));
            return 0;
        }
        if (*report) {
            print_written(qrport::cmd_report(expand_reports(report_dirs), build_config(rep), report_out));
            return 0;
        }
    } catch (const qrport::Interrupted& e) {
        std::cerr << "interrupted: " << e.what() << "\n";
        return static_cast<int>(qrport::ExitCode::interrupted);
    } catch (const qrport::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return static_cast<int>(qrport::ExitCode::usage);
    } catch (const qrport::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(qrport::ExitCode::data);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(qrport::ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return static_cast<int>(qrport::ExitCode::numerical);
    }
    return static_cast<int>(qrport::ExitCode::usage);
}
