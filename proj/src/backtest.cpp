#include "qrport/backtest.hpp"

#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "qrport/errors.hpp"
#include "qrport/rng.hpp"

namespace qrport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

RollingPlan::RollingPlan(Index window_length, Index total_weeks)
    : window(window_length), weeks(total_weeks) {
    if (window_length < 2) throw UsageError("window length must be at least 2");
    if (window_length >= total_weeks) {
        throw UsageError("window length " + std::to_string(window_length) +
                         " leaves no out-of-sample week in a panel of " + std::to_string(total_weeks));
    }
}

VectorXd drift_weights(const VectorXd& w, const VectorXd& r) {
    if (w.size() != r.size()) throw UsageError("weights and returns differ in length");
    const double growth = 1.0 + w.dot(r) / 100.0;
    if (!(growth > 0.0)) throw DataError("portfolio lost all of its value; weights cannot drift");
    return (w.array() * (1.0 + r.array() / 100.0)).matrix() / growth;
}

VectorXd wealth_curve(const VectorXd& oos_returns, double initial) {
    VectorXd w(oos_returns.size() + 1);
    w(0) = initial;
    for (Index k = 0; k < oos_returns.size(); ++k) w(k + 1) = w(k) * (1.0 + oos_returns(k) / 100.0);
    return w;
}

namespace {

[[noreturn]] void rethrow_with_window(std::exception_ptr error, Index window) {
    const std::string prefix = "window " + std::to_string(window) + ": ";
    try {
        std::rethrow_exception(error);
    } catch (const UsageError& e) {
        throw UsageError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    } catch (const std::exception& e) {
        throw NumericalError(prefix + e.what());
    }
}

}  // namespace

BacktestReport roll(const ReturnPanel& panel, Index window, const StrategySpec& spec,
                    const RollOptions& options) {
    spec.validate();
    const RollingPlan plan(window, static_cast<Index>(panel.weeks()));
    const Index n = panel.returns.cols();
    const std::size_t total = static_cast<std::size_t>(plan.windows());

    std::vector<std::optional<WindowResult>> results(total);
    std::vector<std::exception_ptr> errors(total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::atomic<bool> failed{false};
    std::mutex progress_mutex;

    auto worker = [&] {
        for (;;) {
            if (failed.load() || (options.abort && options.abort->load())) return;
            const std::size_t k = next.fetch_add(1);
            if (k >= total) return;
            try {
                const MatrixXd w = panel.returns.middleRows(plan.first_row(static_cast<Index>(k)), window);
                results[k] = run_strategy_window(w, spec, derive_seed(options.seed, k, spec.label), options.solver);
            } catch (...) {
                errors[k] = std::current_exception();
                failed.store(true);
            }
            const std::size_t finished = done.fetch_add(1) + 1;
            if (options.progress) {
                std::lock_guard lock(progress_mutex);
                options.progress(finished, total);
            }
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(total)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    for (std::size_t k = 0; k < total; ++k) {
        if (errors[k]) rethrow_with_window(errors[k], static_cast<Index>(k));
    }
    for (std::size_t k = 0; k < total; ++k) {
        if (!results[k]) throw Interrupted("backtest interrupted after " + std::to_string(done.load()) + " windows");
    }

    BacktestReport report;
    report.label = spec.label;
    report.window = window;
    report.asset_ids = panel.asset_ids;
    report.start_date = panel.week_ends[static_cast<std::size_t>(window - 1)];
    report.oos_returns.resize(plan.windows());
    report.weight_history.resize(plan.windows(), n);
    report.drifted_weights.resize(plan.windows() - 1, n);
    for (std::size_t k = 0; k < total; ++k) {
        const Index row = plan.applied_row(static_cast<Index>(k));
        const VectorXd& w = results[k]->weights.weights;
        const VectorXd r = panel.returns.row(row).transpose();
        report.oos_dates.push_back(panel.week_ends[static_cast<std::size_t>(row)]);
        report.weight_history.row(static_cast<Index>(k)) = w.transpose();
        report.oos_returns(static_cast<Index>(k)) = r.dot(w);
        if (k + 1 < total) report.drifted_weights.row(static_cast<Index>(k)) = drift_weights(w, r).transpose();
        report.diagnostics.push_back(std::move(results[k]->diagnostics));
    }
    return report;
}

MetricBlock report_metrics(const BacktestReport& report, double tau, double eta) {
    return compute_metrics({report.oos_returns.data(), static_cast<std::size_t>(report.oos_returns.size())},
                           report.weight_history, report.drifted_weights, tau, eta);
}

}  // namespace qrport
