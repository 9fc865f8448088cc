#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qrport/qr_solver.hpp"

namespace qrport {

struct BchParams {
    int draws = 1000;  ///< B
    double c = 2.0;
    double beta = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CvParams {
    int folds = 5;  ///< K
    std::uint64_t seed = 0;
    std::vector<double> grid;

    void validate(Eigen::Index observations) const;
};

struct BicParams {
    double c_t = 0.0;  ///< 0 selects log T
    double eta = 1e-5;

    double resolved_c_t(Eigen::Index observations) const;
};

/// B simulated values of the pivotal statistic
///   Lambda = T * max_j |(1/T) sum_t x_jt (tau - 1{e_t <= tau}) / (sigma_j sqrt(tau (1 - tau)))|
/// with e_t uniform draws taken draw-major from the seed's stream.
std::vector<double> bch_draws(const Eigen::MatrixXd& x, double tau, const BchParams& params);

/// c times the order statistic Lambda_(ceil((1 - beta) B)).
double bch_lambda(const Eigen::MatrixXd& x, double tau, const BchParams& params);

struct BicScore {
    double score = 0.0;  ///< lowest finite double on a perfect fit
    double nu_hat = 0.0;  ///< (1/T) sum rho_tau(residuals)
    double loss_sum = 0.0;
    Eigen::Index support_size = 0;
    bool perfect_fit = false;
};

/// log(2 sum rho) + |D| (log T / 2T) C_T for a fit made on exactly the columns x_d.
BicScore bic_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& x_d, double tau,
                   const QuantileFit& fit, const BicParams& params, Eigen::Index observations);

/// Fold index of every observation: a Fisher-Yates shuffle of 0..T-1 cut
/// into K contiguous blocks, the first T mod K of which hold one extra item.
std::vector<int> fold_assignment(Eigen::Index observations, int folds, std::uint64_t seed);

struct CvResult {
    double lambda = 0.0;
    std::size_t lambda_index = 0;
    std::vector<double> curve;  ///< mean validation loss per grid point, NaN where invalid
    std::vector<bool> valid;
};

/// K-fold cross-validation over params.grid. `penalty` supplies the kind and
/// concavity; LASSO folds use weights recomputed from their training rows.
/// The smallest mean loss wins, ties going to the larger lambda.
CvResult kfold_cv(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                  const PenaltySpec& penalty, const CvParams& params,
                  const SolverOptions& options = {});

/// Penalty weights a fit of `kind` applies to each column of x:
/// lasso_scale_weights for LASSO, the column standard deviations otherwise.
Eigen::VectorXd tuning_scale_weights(const Eigen::MatrixXd& x, double tau, PenaltyKind kind);

/// Smallest lambda at which the intercept-only fit is optimal under the given weights.
double lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                  const Eigen::VectorXd& scale_weights);

/// Largest lambda_max over the full sample and every CV training sample, so
/// that the top of a grid empties the fit in every fold.
double cv_lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                     PenaltyKind kind, int folds, std::uint64_t seed);

/// n_points log-spaced values from top down to top * floor.
std::vector<double> log_grid(double top, int n_points, double floor = 1e-4);

std::vector<double> lambda_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                                int n_points, const Eigen::VectorXd& scale_weights,
                                double floor = 1e-4);

struct BicSearchResult {
    double lambda = 0.0;
    std::vector<Eigen::Index> support;
    QuantileFit first_stage;
    QuantileFit refit;
    BicScore score;
    std::size_t supports_scored = 0;
};

/// LASSO path over the grid; each distinct support is refit without penalty
/// and scored once. Ties keep the support met first along the grid.
BicSearchResult bic_search(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                           const std::vector<double>& grid, const BicParams& params,
                           const SolverOptions& options = {});

}  // namespace qrport
