#include "qrport/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "qrport/errors.hpp"
#include "qrport/rng.hpp"
#include "qrport/stats.hpp"

namespace qrport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void BchParams::validate() const {
    if (draws < 1) throw UsageError("BCH needs at least one simulation draw");
    if (!(c > 1.0)) throw UsageError("BCH scaling c must exceed 1");
    if (!(beta > 0.0 && beta < 1.0)) throw UsageError("BCH beta must lie in (0, 1)");
}

void CvParams::validate(Index observations) const {
    if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    if (folds > observations) throw UsageError("more folds than observations");
    if (grid.empty()) throw UsageError("cross-validation grid is empty");
    for (double v : grid) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("grid values must be finite and >= 0");
    }
}

double BicParams::resolved_c_t(Index observations) const {
    const double value = c_t > 0.0 ? c_t : std::log(static_cast<double>(observations));
    if (!(value > 0.0)) throw UsageError("BIC constant C_T must be positive");
    return value;
}

std::vector<double> bch_draws(const MatrixXd& x, double tau, const BchParams& params) {
    validate_tau(tau);
    params.validate();
    const Index t = x.rows();
    const Index p = x.cols();
    if (t < 2) throw UsageError("BCH needs at least 2 observations");
    const VectorXd sd = column_sd(x);
    for (Index j = 0; j < p; ++j) {
        if (!(sd(j) > 0.0)) {
            throw DataError("BCH: regressor column " + std::to_string(j) + " has zero variance");
        }
    }
    const double root = std::sqrt(tau * (1.0 - tau));
    // Per-term value for each sign of the score; identical to evaluating
    // x * g / (sigma * root) term by term.
    MatrixXd above(t, p);
    MatrixXd below(t, p);
    for (Index j = 0; j < p; ++j) {
        const double denom = sd(j) * root;
        for (Index i = 0; i < t; ++i) {
            above(i, j) = x(i, j) * tau / denom;
            below(i, j) = x(i, j) * (tau - 1.0) / denom;
        }
    }
    const double tt = static_cast<double>(t);
    UniformStream stream(params.seed);
    std::vector<char> low(static_cast<std::size_t>(t));
    std::vector<double> out(static_cast<std::size_t>(params.draws));
    for (auto& value : out) {
        for (Index i = 0; i < t; ++i) low[static_cast<std::size_t>(i)] = stream.next() <= tau;
        double best = 0.0;
        for (Index j = 0; j < p; ++j) {
            double sum = 0.0;
            for (Index i = 0; i < t; ++i) {
                sum += low[static_cast<std::size_t>(i)] ? below(i, j) : above(i, j);
            }
            best = std::max(best, std::abs(sum / tt));
        }
        value = tt * best;
    }
    return out;
}

double bch_lambda(const MatrixXd& x, double tau, const BchParams& params) {
    std::vector<double> draws = bch_draws(x, tau, params);
    std::sort(draws.begin(), draws.end());
    const std::size_t k = type1_rank(1.0 - params.beta, draws.size());
    return params.c * draws[k - 1];
}

BicScore bic_score(const VectorXd& y, const MatrixXd& x_d, double tau, const QuantileFit& fit,
                   const BicParams& params, Index observations) {
    validate_tau(tau);
    if (observations < 2) throw UsageError("BIC needs at least 2 observations");
    if (fit.coefficients.size() != x_d.cols()) {
        throw UsageError("BIC: fit does not match the selected columns");
    }
    const VectorXd r = fit.residuals(y, x_d);
    double loss = 0.0;
    for (Index i = 0; i < r.size(); ++i) loss += check_loss(r(i), tau);

    BicScore out;
    out.loss_sum = loss;
    out.nu_hat = loss / static_cast<double>(observations);
    out.support_size = x_d.cols();
    const double tt = static_cast<double>(observations);
    const double penalty =
        static_cast<double>(x_d.cols()) * (std::log(tt) / (2.0 * tt)) * params.resolved_c_t(observations);
    if (loss <= 0.0) {
        out.perfect_fit = true;
        out.score = std::numeric_limits<double>::lowest();
        return out;
    }
    out.score = std::log(2.0 * loss) + penalty;
    return out;
}

std::vector<int> fold_assignment(Index observations, int folds, std::uint64_t seed) {
    if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    if (folds > observations) throw UsageError("more folds than observations");
    const std::size_t n = static_cast<std::size_t>(observations);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    UniformStream stream(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[stream.below(i + 1)]);
    }
    std::vector<int> fold(n);
    const std::size_t k = static_cast<std::size_t>(folds);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        for (std::size_t e = 0; e < size; ++e) fold[perm[pos++]] = static_cast<int>(f);
    }
    return fold;
}

namespace {

struct FoldData {
    VectorXd y_train, y_valid;
    MatrixXd x_train, x_valid;
};

std::vector<FoldData> split_folds(const VectorXd& y, const MatrixXd& x, const std::vector<int>& fold,
                                  int folds) {
    std::vector<FoldData> out(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> train, valid;
        for (Index i = 0; i < y.size(); ++i) {
            (fold[static_cast<std::size_t>(i)] == f ? valid : train).push_back(i);
        }
        FoldData& d = out[static_cast<std::size_t>(f)];
        d.y_train = y(train);
        d.x_train = x(train, Eigen::all);
        d.y_valid = y(valid);
        d.x_valid = x(valid, Eigen::all);
    }
    return out;
}

QuantileFit fit_for_kind(const VectorXd& y, const MatrixXd& x, double tau, const PenaltySpec& penalty,
                         double lambda, const SolverOptions& options) {
    switch (penalty.kind) {
        case PenaltyKind::lasso:
            return fit_qr_weighted_l1(y, x, tau, lambda, lasso_scale_weights(x, tau), options);
        case PenaltyKind::scad:
        case PenaltyKind::mcp: {
            PenaltySpec spec = penalty;
            spec.lambda = lambda;
            spec.scale_weights.resize(0);
            return fit_qr_nonconvex(y, x, tau, spec, options);
        }
        case PenaltyKind::none:
            break;
    }
    throw UsageError("cross-validation needs a lasso, scad or mcp penalty");
}

}  // namespace

CvResult kfold_cv(const VectorXd& y, const MatrixXd& x, double tau, const PenaltySpec& penalty,
                  const CvParams& params, const SolverOptions& options) {
    validate_tau(tau);
    if (x.rows() != y.size()) throw UsageError("design rows do not match response length");
    params.validate(y.size());
    if (penalty.kind == PenaltyKind::none) {
        throw UsageError("cross-validation needs a lasso, scad or mcp penalty");
    }
    const std::vector<int> fold = fold_assignment(y.size(), params.folds, params.seed);
    const std::vector<FoldData> data = split_folds(y, x, fold, params.folds);

    CvResult out;
    out.curve.assign(params.grid.size(), std::numeric_limits<double>::quiet_NaN());
    out.valid.assign(params.grid.size(), false);
    bool found = false;
    double best = 0.0;
    for (std::size_t g = 0; g < params.grid.size(); ++g) {
        const double lambda = params.grid[g];
        double total = 0.0;
        bool ok = true;
        for (const FoldData& d : data) {
            try {
                const QuantileFit fit = fit_for_kind(d.y_train, d.x_train, tau, penalty, lambda, options);
                total += mean_check_loss(fit.residuals(d.y_valid, d.x_valid), tau);
            } catch (const NumericalError&) {
                ok = false;
                break;
            }
        }
        if (!ok || !std::isfinite(total)) continue;
        const double mean = total / static_cast<double>(params.folds);
        out.curve[g] = mean;
        out.valid[g] = true;
        if (!found || mean < best || (mean == best && lambda > out.lambda)) {
            found = true;
            best = mean;
            out.lambda = lambda;
            out.lambda_index = g;
        }
    }
    if (!found) throw NumericalError("cross-validation: every grid value failed");
    return out;
}

VectorXd tuning_scale_weights(const MatrixXd& x, double tau, PenaltyKind kind) {
    if (x.rows() < 2) return VectorXd::Zero(x.cols());
    return kind == PenaltyKind::lasso ? lasso_scale_weights(x, tau) : column_sd(x);
}

double lambda_max(const VectorXd& y, const MatrixXd& x, double tau, const VectorXd& scale_weights) {
    validate_tau(tau);
    const Index t = y.size();
    if (t == 0 || x.rows() != t) throw UsageError("design rows do not match response length");
    if (scale_weights.size() != x.cols()) {
        throw UsageError("scale_weights length does not match regressors");
    }
    // Subgradient of the check loss at the intercept-only optimum. Points tied
    // with the quantile share the value that makes the scores sum to zero.
    const double q = type1_quantile(as_span(y), tau);
    Index below = 0, tied = 0;
    for (Index i = 0; i < t; ++i) {
        if (y(i) < q) ++below;
        else if (y(i) == q) ++tied;
    }
    const double tt = static_cast<double>(t);
    const double tie_value = tau + (static_cast<double>(below) - tt * tau) / static_cast<double>(tied);
    VectorXd psi(t);
    for (Index i = 0; i < t; ++i) {
        psi(i) = y(i) < q ? tau - 1.0 : (y(i) > q ? tau : tie_value);
    }
    double best = 0.0;
    bool any = false;
    for (Index j = 0; j < x.cols(); ++j) {
        if (!(scale_weights(j) > 0.0)) continue;
        any = true;
        best = std::max(best, std::abs(x.col(j).dot(psi) / tt) / scale_weights(j));
    }
    if (!any || !(best > 0.0) || !std::isfinite(best)) {
        throw DataError("lambda grid: design has no penalized column with a nonzero score");
    }
    return best;
}

double cv_lambda_max(const VectorXd& y, const MatrixXd& x, double tau, PenaltyKind kind, int folds,
                     std::uint64_t seed) {
    double top = lambda_max(y, x, tau, tuning_scale_weights(x, tau, kind));
    const std::vector<int> fold = fold_assignment(y.size(), folds, seed);
    for (const FoldData& d : split_folds(y, x, fold, folds)) {
        try {
            top = std::max(top, lambda_max(d.y_train, d.x_train, tau,
                                           tuning_scale_weights(d.x_train, tau, kind)));
        } catch (const DataError&) {
            // A training sample with no usable column cannot raise the top.
        }
    }
    return top;
}

std::vector<double> log_grid(double top, int n_points, double floor) {
    if (n_points < 2) throw UsageError("lambda grid needs at least 2 points");
    if (!(floor > 0.0 && floor < 1.0)) throw UsageError("lambda grid floor must lie in (0, 1)");
    if (!(top > 0.0) || !std::isfinite(top)) throw UsageError("lambda grid top must be positive");
    std::vector<double> grid(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) {
        grid[static_cast<std::size_t>(k)] =
            top * std::pow(floor, static_cast<double>(k) / static_cast<double>(n_points - 1));
    }
    return grid;
}

std::vector<double> lambda_grid(const VectorXd& y, const MatrixXd& x, double tau, int n_points,
                                const VectorXd& scale_weights, double floor) {
    return log_grid(lambda_max(y, x, tau, scale_weights), n_points, floor);
}

BicSearchResult bic_search(const VectorXd& y, const MatrixXd& x, double tau,
                           const std::vector<double>& grid, const BicParams& params,
                           const SolverOptions& options) {
    if (grid.empty()) throw UsageError("BIC search grid is empty");
    const VectorXd weights = lasso_scale_weights(x, tau);
    std::set<std::vector<Index>> seen;
    BicSearchResult best;
    bool found = false;
    for (double lambda : grid) {
        const QuantileFit first = fit_qr_weighted_l1(y, x, tau, lambda, weights, options);
        std::vector<Index> support = first.support(params.eta);
        if (!seen.insert(support).second) continue;
        const QuantileFit refit = refit_support(y, x, support, tau, options);
        const MatrixXd x_d = x(Eigen::all, support);
        QuantileFit on_d = refit;
        on_d.coefficients = refit.coefficients(support);
        const BicScore score = bic_score(y, x_d, tau, on_d, params, y.size());
        const bool better = !found || (score.perfect_fit && !best.score.perfect_fit) ||
                            (score.perfect_fit == best.score.perfect_fit && score.score < best.score.score);
        if (better) {
            found = true;
            best.lambda = lambda;
            best.support = std::move(support);
            best.first_stage = first;
            best.refit = refit;
            best.score = score;
        }
    }
    best.supports_scored = seen.size();
    return best;
}

}  // namespace qrport
