#include "qrport/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "qrport/data_ingest.hpp"
#include "qrport/errors.hpp"

namespace qrport {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        const std::size_t comma = value.find(',', pos);
        const std::string_view item =
            trim(value.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw UsageError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
    }
    return value;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "data",      "data_format", "missing",    "start",    "end",      "windows",  "strategies",
        "tau",       "eta",         "seed",       "bch_draws", "bch_c",   "bch_beta", "bic_ct",
        "cv_folds",  "grid_size",   "grid_floor", "scad_a",   "mcp_a",    "lw_draws", "lw_block",
        "lw_seed",   "initial_wealth", "threads", "out"};
    return keys;
}

void RunConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "data") data = split_list(value);
    else if (key == "data_format") data_format = std::string(value);
    else if (key == "missing") missing = std::string(value);
    else if (key == "start") start = std::string(value);
    else if (key == "end") end = std::string(value);
    else if (key == "windows") {
        windows.clear();
        for (const auto& item : split_list(value)) windows.push_back(parse_value<int>(key, item));
    } else if (key == "strategies") strategies = split_list(value);
    else if (key == "tau") tau = parse_value<double>(key, value);
    else if (key == "eta") eta = parse_value<double>(key, value);
    else if (key == "seed") seed = parse_value<std::uint64_t>(key, value);
    else if (key == "bch_draws") bch_draws = parse_value<int>(key, value);
    else if (key == "bch_c") bch_c = parse_value<double>(key, value);
    else if (key == "bch_beta") bch_beta = parse_value<double>(key, value);
    else if (key == "bic_ct") bic_ct = parse_value<double>(key, value);
    else if (key == "cv_folds") cv_folds = parse_value<int>(key, value);
    else if (key == "grid_size") grid_size = parse_value<int>(key, value);
    else if (key == "grid_floor") grid_floor = parse_value<double>(key, value);
    else if (key == "scad_a") scad_a = parse_value<double>(key, value);
    else if (key == "mcp_a") mcp_a = parse_value<double>(key, value);
    else if (key == "lw_draws") lw_draws = parse_value<int>(key, value);
    else if (key == "lw_block") lw_block = parse_value<int>(key, value);
    else if (key == "lw_seed") lw_seed = parse_value<std::uint64_t>(key, value);
    else if (key == "initial_wealth") initial_wealth = parse_value<double>(key, value);
    else if (key == "threads") threads = parse_value<unsigned>(key, value);
    else if (key == "out") out = std::string(value);
    else throw UsageError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    std::vector<std::string> window_items;
    for (int w : windows) window_items.push_back(std::to_string(w));
    return {
        {"data", join(data)},
        {"data_format", data_format},
        {"missing", missing},
        {"start", start},
        {"end", end},
        {"windows", join(window_items)},
        {"strategies", join(strategies)},
        {"tau", format_number(tau)},
        {"eta", format_number(eta)},
        {"seed", std::to_string(seed)},
        {"bch_draws", std::to_string(bch_draws)},
        {"bch_c", format_number(bch_c)},
        {"bch_beta", format_number(bch_beta)},
        {"bic_ct", format_number(bic_ct)},
        {"cv_folds", std::to_string(cv_folds)},
        {"grid_size", std::to_string(grid_size)},
        {"grid_floor", format_number(grid_floor)},
        {"scad_a", format_number(scad_a)},
        {"mcp_a", format_number(mcp_a)},
        {"lw_draws", std::to_string(lw_draws)},
        {"lw_block", std::to_string(lw_block)},
        {"lw_seed", std::to_string(lw_seed)},
        {"initial_wealth", format_number(initial_wealth)},
        {"threads", std::to_string(threads)},
        {"out", out},
    };
}

void RunConfig::validate() const {
    if (data_format != "weekly" && data_format != "plain" && data_format != "french") {
        throw UsageError("data_format must be weekly, plain or french");
    }
    parse_missing_policy(missing);
    if (!start.empty() && !parse_date(start)) throw UsageError("start is not a valid date");
    if (!end.empty() && !parse_date(end)) throw UsageError("end is not a valid date");
    if (windows.empty()) throw UsageError("at least one window length is required");
    for (int w : windows) {
        if (w < 2) throw UsageError("window lengths must be at least 2");
    }
    if (strategies.empty()) throw UsageError("at least one strategy is required");
    for (const auto& label : strategies) strategy(label).validate();
    if (lw_draws < 1) throw UsageError("lw_draws must be positive");
    if (lw_block < 1) throw UsageError("lw_block must be positive");
    if (!(initial_wealth > 0.0)) throw UsageError("initial_wealth must be positive");
}

StrategySpec RunConfig::strategy(std::string_view label) const {
    StrategySpec spec = StrategySpec::from_label(label);
    spec.tau = tau;
    spec.eta = eta;
    if (spec.penalty == PenaltyKind::scad) spec.penalty_a = scad_a;
    if (spec.penalty == PenaltyKind::mcp) spec.penalty_a = mcp_a;
    spec.bch.draws = bch_draws;
    spec.bch.c = bch_c;
    spec.bch.beta = bch_beta;
    spec.cv.folds = cv_folds;
    spec.bic.c_t = bic_ct;
    spec.bic.eta = eta;
    spec.grid_size = grid_size;
    spec.grid_floor = grid_floor;
    return spec;
}

unsigned RunConfig::resolved_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig parse_config(std::string_view text) {
    RunConfig config;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        try {
            config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const UsageError& e) {
            throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& [key, value] : config.entries()) out += key + " = " + value + "\n";
    return out;
}

}  // namespace qrport
