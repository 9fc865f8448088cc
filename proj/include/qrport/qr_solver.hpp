#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qrport/interior_point.hpp"

namespace qrport {

/// rho_tau(u) = u * (tau - 1{u < 0}).
inline double check_loss(double u, double tau) { return u >= 0.0 ? u * tau : u * (tau - 1.0); }

/// (1/T) * sum rho_tau(r_t).
double mean_check_loss(const Eigen::VectorXd& residuals, double tau);

void validate_tau(double tau);

/// Result of one quantile-regression solve.
struct QuantileFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;  ///< one per regressor column
    double objective = 0.0;        ///< achieved (penalized) loss
    int iterations = 0;            ///< interior-point iterations, summed over subproblems
    int lla_steps = 0;             ///< weighted-L1 reweighting steps (nonconvex fits only)
    bool converged = true;

    /// {j : |coef_j| > eta}
    std::vector<Eigen::Index> support(double eta) const;
    Eigen::VectorXd residuals(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) const;
};

enum class PenaltyKind { none, lasso, scad, mcp };

const char* to_string(PenaltyKind kind);

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::none;
    double lambda = 0.0;
    double a = 0.0;                 ///< concavity: SCAD needs a > 2, MCP a > 1
    Eigen::VectorXd scale_weights;  ///< LASSO per-coefficient factors; empty means unit

    /// Throws UsageError on a negative lambda, a bad `a` or a weight-length mismatch.
    void validate(Eigen::Index regressors) const;
};

struct SolverOptions {
    InteriorPointOptions interior_point;
    int lla_max_steps = 20;
    double lla_tolerance = 1e-6;
};

/// Unpenalized quantile regression with intercept:
///   min (1/T) sum rho_tau(y_t - mu - x_t w).
/// Columns that are linearly dependent on the intercept and earlier columns
/// are fixed at zero, which picks one optimum of a degenerate problem.
QuantileFit fit_qr(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                   const SolverOptions& options = {});

/// min (1/T) sum rho_tau(y_t - mu - x_t w) + lambda * sum_j scale_j |w_j|.
/// The intercept is never penalized.
QuantileFit fit_qr_weighted_l1(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                               double lambda, const Eigen::VectorXd& scale_weights,
                               const SolverOptions& options = {});

/// sigma_j * sqrt(tau (1 - tau)) / T, the coefficient scaling of the
/// portfolio LASSO problem.
Eigen::VectorXd lasso_scale_weights(const Eigen::MatrixXd& x, double tau);

/// SCAD or MCP penalty at coefficient w.
double penalty_value(double w, const PenaltySpec& spec);

/// d/d|w| of the penalty, using the right derivative at 0 (= lambda).
double penalty_derivative(double w, const PenaltySpec& spec);

/// SCAD/MCP penalized quantile regression by local linear approximation:
/// start from the LASSO fit with the same lambda, then repeatedly solve the
/// weighted-L1 problem with weights p'(|w|). Penalties act on coefficients
/// of unit-variance columns; coefficients are reported on the original scale.
/// `objective` uses the exact nonconvex penalty and never increases across
/// steps; `converged` is false when the step cap is hit.
QuantileFit fit_qr_nonconvex(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                             const PenaltySpec& spec, const SolverOptions& options = {});

/// Exact nonconvex objective of a given (intercept, coefficients).
double nonconvex_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                           const PenaltySpec& spec, double intercept,
                           const Eigen::VectorXd& coefficients);

/// Unpenalized refit on the listed columns only; other coefficients are
/// exactly zero in the returned fit (which keeps the full column count).
QuantileFit refit_support(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                          const std::vector<Eigen::Index>& support, double tau,
                          const SolverOptions& options = {});

/// Dispatches on spec.kind: none -> fit_qr, lasso -> weighted L1, scad/mcp -> LLA.
QuantileFit fit_penalized(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                          const PenaltySpec& spec, const SolverOptions& options = {});

}  // namespace qrport
