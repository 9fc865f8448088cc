#include "qrport/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "qrport/errors.hpp"
#include "qrport/rng.hpp"
#include "qrport/stats.hpp"

namespace qrport {

using Eigen::Index;
using Eigen::MatrixXd;

double var_tau(std::span<const double> returns, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw UsageError("tau must lie in (0, 1)");
    const double needed = std::floor(1.0 / tau + 1e-9);
    if (returns.empty() || static_cast<double>(returns.size()) < needed) {
        throw DataError("VaR needs at least " + std::to_string(static_cast<long>(needed)) +
                        " observations at tau = " + std::to_string(tau));
    }
    return type1_quantile(returns, tau);
}

double expected_shortfall(std::span<const double> returns, double tau) {
    const double var = var_tau(returns, tau);
    double total = 0.0;
    std::size_t count = 0;
    for (double r : returns) {
        if (r < var) {
            total += r;
            ++count;
        }
    }
    if (count == 0) {
        throw DataError("expected shortfall: no return lies strictly below the VaR; the series is "
                        "too short or too discrete for this tau");
    }
    return -total / static_cast<double>(count);
}

double sharpe(std::span<const double> returns) {
    const double sd = sample_sd(returns);
    if (!(sd > 0.0)) throw DataError("Sharpe ratio undefined for a series with zero deviation");
    return sample_mean(returns) / sd * 100.0;
}

double turnover(const MatrixXd& weight_history, const MatrixXd& drifted_weights) {
    const Index rows = weight_history.rows();
    if (rows == 0) throw UsageError("turnover of an empty weight history");
    if (drifted_weights.rows() != rows - 1 || drifted_weights.cols() != weight_history.cols()) {
        throw UsageError("turnover: drifted weights must have one row fewer than the weight history");
    }
    if (rows == 1) return 0.0;
    double total = 0.0;
    for (Index k = 1; k < rows; ++k) {
        total += (weight_history.row(k) - drifted_weights.row(k - 1)).cwiseAbs().sum();
    }
    return total / static_cast<double>(rows - 1);
}

PositionCounts active_short_positions(const MatrixXd& weight_history, double eta) {
    if (!(eta >= 0.0)) throw UsageError("eta must be >= 0");
    PositionCounts out;
    if (weight_history.rows() == 0) return out;
    double active = 0.0, shorts = 0.0;
    for (Index k = 0; k < weight_history.rows(); ++k) {
        for (Index j = 0; j < weight_history.cols(); ++j) {
            const double w = weight_history(k, j);
            if (std::abs(w) > eta) active += 1.0;
            if (w < -eta) shorts += 1.0;
        }
    }
    out.active = active / static_cast<double>(weight_history.rows());
    out.short_positions = shorts / static_cast<double>(weight_history.rows());
    return out;
}

MetricBlock compute_metrics(std::span<const double> oos_returns, const MatrixXd& weight_history,
                            const MatrixXd& drifted_weights, double tau, double eta) {
    MetricBlock m;
    m.tau = tau;
    m.eta = eta;
    m.es = expected_shortfall(oos_returns, tau);
    m.sd = sample_sd(oos_returns);
    m.sr = sharpe(oos_returns);
    m.to = turnover(weight_history, drifted_weights);
    const PositionCounts counts = active_short_positions(weight_history, eta);
    m.ap = counts.active;
    m.sp = counts.short_positions;
    return m;
}

const char* to_string(LwKind kind) { return kind == LwKind::variance ? "variance" : "sharpe"; }

namespace {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

struct Moments {
    double mu1, mu2, g1, g2;  // means and uncentered second moments
};

Moments moments_of(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    Moments m{0, 0, 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        m.mu1 += a[i];
        m.mu2 += b[i];
        m.g1 += a[i] * a[i];
        m.g2 += b[i] * b[i];
    }
    m.mu1 /= n;
    m.mu2 /= n;
    m.g1 /= n;
    m.g2 /= n;
    return m;
}

double statistic(LwKind kind, const Moments& m) {
    const double v1 = m.g1 - m.mu1 * m.mu1;
    const double v2 = m.g2 - m.mu2 * m.mu2;
    if (kind == LwKind::variance) return std::log(v1) - std::log(v2);
    return m.mu1 / std::sqrt(v1) - m.mu2 / std::sqrt(v2);
}

Vec4 gradient(LwKind kind, const Moments& m) {
    const double v1 = m.g1 - m.mu1 * m.mu1;
    const double v2 = m.g2 - m.mu2 * m.mu2;
    if (kind == LwKind::variance) {
        return {-2.0 * m.mu1 / v1, 2.0 * m.mu2 / v2, 1.0 / v1, -1.0 / v2};
    }
    const double p1 = std::pow(v1, 1.5);
    const double p2 = std::pow(v2, 1.5);
    return {m.g1 / p1, -m.g2 / p2, -m.mu1 / (2.0 * p1), m.mu2 / (2.0 * p2)};
}

Vec4 centered(const Moments& m, double a, double b) {
    return {a - m.mu1, b - m.mu2, a * a - m.g1, b * b - m.g2};
}

double quadratic(const Vec4& g, const Mat4& s) {
    double q = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) q += g[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
    return q;
}

double parzen(double x) {
    x = std::abs(x);
    if (x <= 0.5) return 1.0 - 6.0 * x * x + 6.0 * x * x * x;
    if (x <= 1.0) return 2.0 * (1.0 - x) * (1.0 - x) * (1.0 - x);
    return 0.0;
}

/// Parzen-kernel HAC estimate of the long-run covariance of the moment scores.
Mat4 hac_covariance(const std::vector<double>& a, const std::vector<double>& b, const Moments& m) {
    const std::size_t n = a.size();
    std::vector<Vec4> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = centered(m, a[t], b[t]);
    const double bandwidth = 2.6614 * std::pow(static_cast<double>(n), 0.2);
    Mat4 psi{};
    for (std::size_t lag = 0; lag < n; ++lag) {
        const double k = parzen(static_cast<double>(lag) / bandwidth);
        if (k == 0.0) break;
        Mat4 gamma{};
        for (std::size_t t = lag; t < n; ++t)
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 4; ++j) gamma[i][j] += y[t][i] * y[t - lag][j];
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double g = gamma[i][j] / static_cast<double>(n);
                psi[i][j] += lag == 0 ? g : k * (g + gamma[j][i] / static_cast<double>(n));
            }
        }
    }
    return psi;
}

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

LwTestResult run_test(LwKind kind, std::span<const double> r1, std::span<const double> r2,
                      const LwOptions& options) {
    if (r1.size() != r2.size()) throw UsageError("paired tests need series of equal length");
    if (options.draws < 1) throw UsageError("bootstrap needs at least one draw");
    if (options.block_length < 1) throw UsageError("bootstrap block length must be positive");
    const std::size_t n = r1.size();
    const std::size_t block = static_cast<std::size_t>(options.block_length);
    if (n < 2 * block) throw DataError("series too short for the block bootstrap");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(r1[i]) || !std::isfinite(r2[i])) throw DataError("non-finite return in test input");
    }

    LwTestResult out;
    out.kind = kind;
    out.bootstrap_draws = options.draws;
    out.block_length = options.block_length;

    const std::vector<double> a(r1.begin(), r1.end());
    const std::vector<double> b(r2.begin(), r2.end());
    // Moments of each series are order-free; summing sorted copies makes
    // them invariant to permutations bit for bit.
    const std::vector<double> sa = sorted_copy(r1);
    const std::vector<double> sb = sorted_copy(r2);
    const Moments ma = moments_of(sa, sa);
    const Moments mb = moments_of(sb, sb);
    const Moments m{ma.mu1, mb.mu1, ma.g1, mb.g1};
    if (!(m.g1 - m.mu1 * m.mu1 > 0.0) || !(m.g2 - m.mu2 * m.mu2 > 0.0)) {
        throw DataError("test statistic undefined for a constant series");
    }
    if (a == b) return out;

    const double d = statistic(kind, m);
    out.statistic = d;
    const double se = std::sqrt(std::max(quadratic(gradient(kind, m), hac_covariance(a, b, m)), 0.0) /
                                static_cast<double>(n));
    out.standard_error = se;
    if (d == 0.0) return out;
    if (!(se > 0.0)) throw NumericalError("test standard error is zero");
    const double observed = std::abs(d) / se;

    const std::size_t blocks = n / block;
    const std::size_t len = blocks * block;
    const double root_block = std::sqrt(static_cast<double>(block));
    UniformStream stream(options.seed);
    std::vector<double> ba(len), bb(len);
    std::size_t exceed = 0;
    for (int draw = 0; draw < options.draws; ++draw) {
        for (std::size_t k = 0; k < blocks; ++k) {
            const std::size_t start = static_cast<std::size_t>(stream.below(n));
            for (std::size_t i = 0; i < block; ++i) {
                ba[k * block + i] = a[(start + i) % n];
                bb[k * block + i] = b[(start + i) % n];
            }
        }
        const Moments bm = moments_of(ba, bb);
        const double v1 = bm.g1 - bm.mu1 * bm.mu1;
        const double v2 = bm.g2 - bm.mu2 * bm.mu2;
        if (!(v1 > 0.0) || !(v2 > 0.0)) {
            ++exceed;
            continue;
        }
        Mat4 psi{};
        for (std::size_t k = 0; k < blocks; ++k) {
            Vec4 zeta{};
            for (std::size_t i = 0; i < block; ++i) {
                const Vec4 y = centered(bm, ba[k * block + i], bb[k * block + i]);
                for (std::size_t c = 0; c < 4; ++c) zeta[c] += y[c];
            }
            for (std::size_t c = 0; c < 4; ++c) zeta[c] /= root_block;
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t j = 0; j < 4; ++j) psi[i][j] += zeta[i] * zeta[j];
        }
        for (auto& row : psi)
            for (double& v : row) v /= static_cast<double>(blocks);
        const double se_star =
            std::sqrt(std::max(quadratic(gradient(kind, bm), psi), 0.0) / static_cast<double>(len));
        const double t_star = std::abs(statistic(kind, bm) - d) / se_star;
        if (!(se_star > 0.0) || t_star >= observed) ++exceed;
    }
    out.p_value = static_cast<double>(exceed + 1) / static_cast<double>(options.draws + 1);
    return out;
}

}  // namespace

LwTestResult lw_variance_test(std::span<const double> r1, std::span<const double> r2,
                              const LwOptions& options) {
    return run_test(LwKind::variance, r1, r2, options);
}

LwTestResult lw_sharpe_test(std::span<const double> r1, std::span<const double> r2,
                            const LwOptions& options) {
    return run_test(LwKind::sharpe, r1, r2, options);
}

}  // namespace qrport
