#pragma once

// Dense two-phase tableau simplex with Bland's rule. Test-only reference
// solver, deliberately sharing no code with the interior-point path.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace oracle {

struct LpResult {
    double objective = 0.0;
    std::vector<double> x;
};

/// min c'x  s.t.  A x = b, x >= 0.  Returns nullopt if infeasible; throws if unbounded.
inline std::optional<LpResult> simplex(std::vector<std::vector<double>> a, std::vector<double> b,
                                       const std::vector<double>& c) {
    const std::size_t m = a.size();
    const std::size_t n = c.size();
    constexpr double eps = 1e-11;
    for (std::size_t i = 0; i < m; ++i) {
        if (b[i] < 0) {
            for (auto& v : a[i]) v = -v;
            b[i] = -b[i];
        }
    }
    // Columns: n structural, m artificial, then rhs.
    const std::size_t cols = n + m + 1;
    std::vector<std::vector<double>> tab(m + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) tab[i][j] = a[i][j];
        tab[i][n + i] = 1.0;
        tab[i][cols - 1] = b[i];
        basis[i] = n + i;
    }

    auto pivot = [&](std::size_t r, std::size_t col) {
        const double pv = tab[r][col];
        for (auto& v : tab[r]) v /= pv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == r || tab[i][col] == 0.0) continue;
            const double f = tab[i][col];
            for (std::size_t j = 0; j < cols; ++j) tab[i][j] -= f * tab[r][j];
        }
        basis[r] = col;
    };

    auto run = [&](std::size_t allowed) {
        for (int guard = 0; guard < 100000; ++guard) {
            std::size_t enter = allowed;
            for (std::size_t j = 0; j < allowed; ++j) {
                if (tab[m][j] < -eps) {
                    enter = j;  // Bland: lowest index with negative reduced cost
                    break;
                }
            }
            if (enter == allowed) return;
            std::size_t leave = m;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (tab[i][enter] > eps) {
                    const double ratio = tab[i][cols - 1] / tab[i][enter];
                    if (ratio < best - 1e-14 ||
                        (std::abs(ratio - best) <= 1e-14 && basis[i] < basis[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m) throw std::runtime_error("LP unbounded");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex iteration guard hit");
    };

    // Phase 1: minimize the sum of artificials.
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += tab[i][j];
        tab[m][j] = (j >= n && j < n + m) ? 0.0 : -s;
    }
    run(n + m);
    if (-tab[m][cols - 1] > 1e-8) return std::nullopt;
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < n) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(tab[i][j]) > 1e-9) {
                pivot(i, j);
                break;
            }
        }
    }
    // Phase 2 objective row.
    for (std::size_t j = 0; j < cols; ++j) tab[m][j] = j < n ? c[j] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t bj = basis[i];
        if (bj >= n) continue;
        const double f = tab[m][bj];
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < cols; ++j) tab[m][j] -= f * tab[i][j];
    }
    run(n);

    LpResult res;
    res.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < n) res.x[basis[i]] = tab[i][cols - 1];
    }
    res.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    return res;
}

/// Optimal value of  (1/T) sum rho_tau(y - mu - X w) + lambda * sum s_j |w_j|
/// via the split LP (mu+, mu-, w+, w-, u+, u-).
inline double weighted_l1_qr_objective(const std::vector<double>& y,
                                       const std::vector<std::vector<double>>& x,  // T rows
                                       double tau, double lambda,
                                       const std::vector<double>& scale) {
    const std::size_t t = y.size();
    const std::size_t p = t ? x[0].size() : 0;
    const std::size_t n = 2 + 2 * p + 2 * t;
    std::vector<std::vector<double>> a(t, std::vector<double>(n, 0.0));
    std::vector<double> c(n, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        c[2 + j] = lambda * scale[j];
        c[2 + p + j] = lambda * scale[j];
    }
    for (std::size_t i = 0; i < t; ++i) {
        a[i][0] = 1.0;
        a[i][1] = -1.0;
        for (std::size_t j = 0; j < p; ++j) {
            a[i][2 + j] = x[i][j];
            a[i][2 + p + j] = -x[i][j];
        }
        a[i][2 + 2 * p + i] = 1.0;
        a[i][2 + 2 * p + t + i] = -1.0;
        c[2 + 2 * p + i] = tau / static_cast<double>(t);
        c[2 + 2 * p + t + i] = (1.0 - tau) / static_cast<double>(t);
    }
    const auto res = simplex(a, y, c);
    if (!res) throw std::runtime_error("quantile LP reported infeasible");
    return res->objective;
}

}  // namespace oracle
