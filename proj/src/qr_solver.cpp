#include "qrport/qr_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrport/errors.hpp"
#include "qrport/stats.hpp"

namespace qrport {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_inputs(const VectorXd& y, const MatrixXd& x) {
    if (y.size() == 0) throw UsageError("quantile regression needs at least one observation");
    if (x.rows() != y.size()) throw UsageError("design rows do not match response length");
    if (!y.allFinite() || !x.allFinite()) throw NumericalError("non-finite regression input");
}

/// Greedy in column order: keeps a candidate when it adds rank beyond the
/// intercept and the columns already kept (Gram-Schmidt, two passes).
std::vector<Index> independent_columns(const MatrixXd& x, const std::vector<Index>& candidates) {
    std::vector<Index> keep;
    if (candidates.empty()) return keep;
    std::vector<VectorXd> basis;
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    for (Index j : candidates) {
        VectorXd v = x.col(j).array() - x.col(j).mean();
        const double norm0 = v.norm();
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : basis) v -= q.dot(v) * q;
        }
        const double norm = v.norm();
        if (norm <= 1e-10 * std::max(norm0, 1e-300) || norm <= 1e-13 * scale) continue;
        if (static_cast<Index>(keep.size()) + 1 >= x.rows()) break;
        basis.push_back(v / norm);
        keep.push_back(j);
    }
    return keep;
}

QuantileFit intercept_only(const VectorXd& y, Index p, double tau) {
    QuantileFit fit;
    fit.intercept = type1_quantile(as_span(y), tau);
    fit.coefficients = VectorXd::Zero(p);
    fit.objective = mean_check_loss((y.array() - fit.intercept).matrix(), tau);
    return fit;
}

/// min (1/T) sum rho(y - mu - x w) + sum_j penalty_j |w_j|.
QuantileFit solve_weighted_l1(const VectorXd& y, const MatrixXd& x, double tau,
                              const VectorXd& penalty, const InteriorPointOptions& ipm) {
    check_inputs(y, x);
    validate_tau(tau);
    const Index t_obs = y.size();
    const Index p = x.cols();
    if (penalty.size() != p) throw UsageError("penalty weights length does not match regressors");
    if ((penalty.array() < 0.0).any() || !penalty.allFinite()) {
        throw UsageError("penalty weights must be finite and nonnegative");
    }

    std::vector<Index> penalized, unpenalized;
    for (Index j = 0; j < p; ++j) (penalty(j) > 0.0 ? penalized : unpenalized).push_back(j);
    std::vector<Index> kept = independent_columns(x, unpenalized);
    kept.insert(kept.end(), penalized.begin(), penalized.end());
    std::sort(kept.begin(), kept.end());

    QuantileFit best = intercept_only(y, p, tau);
    if (kept.empty()) return best;

    const Index m = static_cast<Index>(kept.size()) + 1;
    const Index n = t_obs + static_cast<Index>(penalized.size());
    AsymmetricL1Problem prob;
    prob.design = MatrixXd::Zero(n, m);
    prob.response = VectorXd::Zero(n);
    prob.above.resize(n);
    prob.below.resize(n);
    prob.design.col(0).head(t_obs).setOnes();
    for (std::size_t k = 0; k < kept.size(); ++k) {
        prob.design.col(static_cast<Index>(k) + 1).head(t_obs) = x.col(kept[k]);
    }
    prob.response.head(t_obs) = y;
    prob.above.head(t_obs).setConstant(tau / static_cast<double>(t_obs));
    prob.below.head(t_obs).setConstant((1.0 - tau) / static_cast<double>(t_obs));
    Index row = t_obs;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const double weight = penalty(kept[k]);
        if (weight <= 0.0) continue;
        prob.design(row, static_cast<Index>(k) + 1) = 1.0;
        prob.above(row) = weight;
        prob.below(row) = weight;
        ++row;
    }

    const InteriorPointResult sol = solve_asymmetric_l1(prob, ipm);
    QuantileFit fit;
    fit.intercept = sol.theta(0);
    fit.coefficients = VectorXd::Zero(p);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        fit.coefficients(kept[k]) = sol.theta(static_cast<Index>(k) + 1);
    }
    fit.iterations = sol.iterations;
    fit.converged = sol.converged;
    fit.objective = mean_check_loss(fit.residuals(y, x), tau) +
                    penalty.dot(fit.coefficients.cwiseAbs());
    if (!std::isfinite(fit.objective)) throw NumericalError("solver produced a non-finite objective");

    // Never return a point worse than the feasible intercept-only start, and
    // prefer it when the two agree to rounding.
    if (best.objective <= fit.objective + 1e-12 * (1.0 + std::abs(fit.objective))) {
        best.iterations = fit.iterations;
        best.converged = true;
        return best;
    }
    return fit;
}

}  // namespace

double mean_check_loss(const VectorXd& residuals, double tau) {
    double total = 0.0;
    for (Index i = 0; i < residuals.size(); ++i) total += check_loss(residuals(i), tau);
    return total / static_cast<double>(residuals.size());
}

void validate_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw UsageError("tau must lie in (0, 1)");
}

std::vector<Index> QuantileFit::support(double eta) const {
    std::vector<Index> out;
    for (Index j = 0; j < coefficients.size(); ++j) {
        if (std::abs(coefficients(j)) > eta) out.push_back(j);
    }
    return out;
}

VectorXd QuantileFit::residuals(const VectorXd& y, const MatrixXd& x) const {
    VectorXd r = y - x * coefficients;
    r.array() -= intercept;
    return r;
}

const char* to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::none: return "none";
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::scad: return "scad";
        case PenaltyKind::mcp: return "mcp";
    }
    return "?";
}

void PenaltySpec::validate(Index regressors) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and >= 0");
    if (kind == PenaltyKind::scad && !(a > 2.0)) throw UsageError("SCAD requires a > 2");
    if (kind == PenaltyKind::mcp && !(a > 1.0)) throw UsageError("MCP requires a > 1");
    if (scale_weights.size() != 0 && scale_weights.size() != regressors) {
        throw UsageError("scale_weights length does not match regressors");
    }
    if ((scale_weights.array() < 0.0).any()) throw UsageError("scale_weights must be nonnegative");
}

QuantileFit fit_qr(const VectorXd& y, const MatrixXd& x, double tau, const SolverOptions& options) {
    return solve_weighted_l1(y, x, tau, VectorXd::Zero(x.cols()), options.interior_point);
}

QuantileFit fit_qr_weighted_l1(const VectorXd& y, const MatrixXd& x, double tau, double lambda,
                               const VectorXd& scale_weights, const SolverOptions& options) {
    if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
    return solve_weighted_l1(y, x, tau, lambda * scale_weights, options.interior_point);
}

VectorXd lasso_scale_weights(const MatrixXd& x, double tau) {
    validate_tau(tau);
    return column_sd(x) * (std::sqrt(tau * (1.0 - tau)) / static_cast<double>(x.rows()));
}

double penalty_value(double w, const PenaltySpec& spec) {
    spec.validate(0);
    const double t = std::abs(w);
    const double lam = spec.lambda;
    const double a = spec.a;
    switch (spec.kind) {
        case PenaltyKind::scad:
            if (t < lam) return lam * t;
            if (t <= a * lam) return (a * lam * t - (t * t + lam * lam) / 2.0) / (a - 1.0);
            return (a + 1.0) * lam * lam / 2.0;
        case PenaltyKind::mcp:
            if (t <= a * lam) return lam * t - t * t / (2.0 * a);
            return a * lam * lam / 2.0;
        case PenaltyKind::lasso: return lam * t;
        case PenaltyKind::none: return 0.0;
    }
    return 0.0;
}

double penalty_derivative(double w, const PenaltySpec& spec) {
    spec.validate(0);
    const double t = std::abs(w);
    const double lam = spec.lambda;
    const double a = spec.a;
    switch (spec.kind) {
        case PenaltyKind::scad:
            if (t <= lam) return lam;
            if (t <= a * lam) return (a * lam - t) / (a - 1.0);
            return 0.0;
        case PenaltyKind::mcp:
            if (t <= a * lam) return lam - t / a;
            return 0.0;
        case PenaltyKind::lasso: return lam;
        case PenaltyKind::none: return 0.0;
    }
    return 0.0;
}

double nonconvex_objective(const VectorXd& y, const MatrixXd& x, double tau, const PenaltySpec& spec,
                           double intercept, const VectorXd& coefficients) {
    const VectorXd sd = column_sd(x);
    VectorXd r = y - x * coefficients;
    r.array() -= intercept;
    double total = mean_check_loss(r, tau);
    for (Index j = 0; j < coefficients.size(); ++j) total += penalty_value(sd(j) * coefficients(j), spec);
    return total;
}

QuantileFit fit_qr_nonconvex(const VectorXd& y, const MatrixXd& x, double tau, const PenaltySpec& spec,
                             const SolverOptions& options) {
    if (spec.kind != PenaltyKind::scad && spec.kind != PenaltyKind::mcp) {
        throw UsageError("fit_qr_nonconvex needs a SCAD or MCP penalty");
    }
    spec.validate(x.cols());
    check_inputs(y, x);
    const VectorXd sd = x.rows() >= 2 ? column_sd(x) : VectorXd::Zero(x.cols());

    auto objective_of = [&](const QuantileFit& f) {
        return nonconvex_objective(y, x, tau, spec, f.intercept, f.coefficients);
    };

    QuantileFit current = fit_qr_weighted_l1(y, x, tau, spec.lambda, sd, options);
    current.objective = objective_of(current);
    int total_iterations = current.iterations;
    QuantileFit best = current;
    bool converged = false;
    int steps = 0;

    while (steps < options.lla_max_steps) {
        VectorXd weights(x.cols());
        for (Index j = 0; j < x.cols(); ++j) {
            weights(j) = sd(j) * penalty_derivative(sd(j) * current.coefficients(j), spec);
        }
        QuantileFit next = fit_qr_weighted_l1(y, x, tau, 1.0, weights, options);
        ++steps;
        total_iterations += next.iterations;
        next.objective = objective_of(next);
        const double change = (next.coefficients - current.coefficients).cwiseAbs().maxCoeff();
        if (next.objective > best.objective + 1e-12 * (1.0 + std::abs(best.objective))) {
            // Majorization guarantees descent; a rise is solver noise, so stop here.
            converged = change < options.lla_tolerance;
            break;
        }
        if (next.objective <= best.objective) best = next;
        current = std::move(next);
        if (x.cols() == 0 || change < options.lla_tolerance) {
            converged = true;
            break;
        }
    }
    best.iterations = total_iterations;
    best.lla_steps = steps;
    best.converged = converged;
    return best;
}

QuantileFit refit_support(const VectorXd& y, const MatrixXd& x, const std::vector<Index>& support,
                          double tau, const SolverOptions& options) {
    MatrixXd selected(x.rows(), static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (support[k] < 0 || support[k] >= x.cols()) throw UsageError("support index out of range");
        selected.col(static_cast<Index>(k)) = x.col(support[k]);
    }
    const QuantileFit sub = fit_qr(y, selected, tau, options);
    QuantileFit fit = sub;
    fit.coefficients = VectorXd::Zero(x.cols());
    for (std::size_t k = 0; k < support.size(); ++k) {
        fit.coefficients(support[k]) = sub.coefficients(static_cast<Index>(k));
    }
    return fit;
}

QuantileFit fit_penalized(const VectorXd& y, const MatrixXd& x, double tau, const PenaltySpec& spec,
                          const SolverOptions& options) {
    switch (spec.kind) {
        case PenaltyKind::none: return fit_qr(y, x, tau, options);
        case PenaltyKind::lasso: {
            spec.validate(x.cols());
            const VectorXd weights =
                spec.scale_weights.size() == 0 ? VectorXd::Ones(x.cols()) : spec.scale_weights;
            return fit_qr_weighted_l1(y, x, tau, spec.lambda, weights, options);
        }
        case PenaltyKind::scad:
        case PenaltyKind::mcp: return fit_qr_nonconvex(y, x, tau, spec, options);
    }
    throw UsageError("unknown penalty kind");
}

}  // namespace qrport
