#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace qrport {

/// Type-1 empirical tau-quantile. Needs n >= floor(1/tau) so that the
/// quantile is not extrapolated below the sample.
double var_tau(std::span<const double> returns, double tau);

/// Negative mean of the returns strictly below var_tau.
double expected_shortfall(std::span<const double> returns, double tau);

/// Mean over (n-1) standard deviation, in percent.
double sharpe(std::span<const double> returns);

/// Mean L1 distance between each rebalanced row (from the second on) and
/// the drifted weights that precede it.
double turnover(const Eigen::MatrixXd& weight_history, const Eigen::MatrixXd& drifted_weights);

struct PositionCounts {
    double active = 0.0;
    double short_positions = 0.0;
};

PositionCounts active_short_positions(const Eigen::MatrixXd& weight_history, double eta);

struct MetricBlock {
    double es = 0.0;
    double sd = 0.0;
    double sr = 0.0;
    double to = 0.0;
    double ap = 0.0;
    double sp = 0.0;
    double tau = 0.05;
    double eta = 1e-5;
};

MetricBlock compute_metrics(std::span<const double> oos_returns, const Eigen::MatrixXd& weight_history,
                            const Eigen::MatrixXd& drifted_weights, double tau, double eta);

enum class LwKind { variance, sharpe };

const char* to_string(LwKind kind);

struct LwOptions {
    int draws = 4999;
    int block_length = 5;
    std::uint64_t seed = 0;
};

struct LwTestResult {
    double statistic = 0.0;       ///< difference of log-variances or of Sharpe ratios
    double standard_error = 0.0;  ///< HAC standard error of the statistic
    double p_value = 1.0;
    int bootstrap_draws = 0;
    int block_length = 0;
    LwKind kind = LwKind::variance;
};

/// Two-sided test of equal variances on paired series via a studentized
/// circular block bootstrap; the statistic is log var1 - log var2.
LwTestResult lw_variance_test(std::span<const double> r1, std::span<const double> r2,
                              const LwOptions& options = {});

/// Same procedure for the difference of Sharpe ratios.
LwTestResult lw_sharpe_test(std::span<const double> r1, std::span<const double> r2,
                            const LwOptions& options = {});

}  // namespace qrport
