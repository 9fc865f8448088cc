#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qrport/strategy.hpp"

namespace qrport {

/// Everything a backtest run depends on. Serialized as flat `key = value`
/// lines; lists are comma separated.
struct RunConfig {
    std::vector<std::string> data;
    std::string data_format = "weekly";  ///< weekly, plain (daily) or french (daily)
    std::string missing = "fail";
    std::string start;  ///< optional first daily date
    std::string end;    ///< optional last daily date
    std::vector<int> windows = {100, 200};
    std::vector<std::string> strategies = strategy_labels();
    double tau = 0.05;
    double eta = 1e-5;
    std::uint64_t seed = 20190426;
    int bch_draws = 1000;
    double bch_c = 2.0;
    double bch_beta = 0.1;
    double bic_ct = 0.0;  ///< 0 means log T
    int cv_folds = 5;
    int grid_size = 100;
    double grid_floor = 1e-4;
    double scad_a = 3.7;
    double mcp_a = 3.0;
    int lw_draws = 4999;
    int lw_block = 5;
    std::uint64_t lw_seed = 7;
    double initial_wealth = 1.0;
    unsigned threads = 0;  ///< 0 uses the hardware concurrency
    std::string out = "qrport-out";

    /// Applies one key. Throws UsageError on an unknown key or bad value.
    void set(std::string_view key, std::string_view value);

    /// Canonical key-value form, in a fixed key order.
    std::vector<std::pair<std::string, std::string>> entries() const;

    void validate() const;

    /// Strategy spec for `label` with this run's hyperparameters.
    StrategySpec strategy(std::string_view label) const;

    unsigned resolved_threads() const;
};

/// Config keys accepted by RunConfig::set, in canonical order.
const std::vector<std::string>& config_keys();

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& config);

}  // namespace qrport
