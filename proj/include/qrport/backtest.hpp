#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qrport/data_ingest.hpp"
#include "qrport/metrics.hpp"
#include "qrport/strategy.hpp"

namespace qrport {

/// Window k covers weeks [k, k + T - 1]; its weights earn the week k + T return.
struct RollingPlan {
    Eigen::Index window = 0;  ///< T
    Eigen::Index weeks = 0;   ///< Q

    RollingPlan(Eigen::Index window_length, Eigen::Index total_weeks);
    Eigen::Index windows() const { return weeks - window; }
    Eigen::Index first_row(Eigen::Index k) const { return k; }
    Eigen::Index applied_row(Eigen::Index k) const { return k + window; }
};

struct BacktestReport {
    std::string label;
    Eigen::Index window = 0;
    Date start_date;  ///< last in-sample week of the first window
    std::vector<Date> oos_dates;
    std::vector<std::string> asset_ids;
    Eigen::VectorXd oos_returns;      ///< Q - T, percent
    Eigen::MatrixXd weight_history;   ///< (Q - T) x N, post-rebalance
    Eigen::MatrixXd drifted_weights;  ///< (Q - T - 1) x N, pre-rebalance
    std::vector<WindowDiagnostics> diagnostics;
};

/// Buy-and-hold drift of w over one period of percent returns r.
Eigen::VectorXd drift_weights(const Eigen::VectorXd& w, const Eigen::VectorXd& r);

/// W_0 = initial, W_{k+1} = W_k (1 + r_k / 100).
Eigen::VectorXd wealth_curve(const Eigen::VectorXd& oos_returns, double initial = 1.0);

struct RollOptions {
    unsigned threads = 1;
    std::uint64_t seed = 0;
    SolverOptions solver;
    const std::atomic<bool>* abort = nullptr;  ///< checked between windows
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs the strategy on every window. Results do not depend on the thread
/// count. A failing window rethrows its error prefixed with the window index;
/// a raised abort flag throws Interrupted once in-flight windows finish.
BacktestReport roll(const ReturnPanel& panel, Eigen::Index window, const StrategySpec& spec,
                    const RollOptions& options = {});

/// Metric block of a finished report.
MetricBlock report_metrics(const BacktestReport& report, double tau, double eta);

}  // namespace qrport
