#pragma once

#include <Eigen/Dense>

namespace qrport {

/// min over theta of  sum_i above_i * max(r_i, 0) + below_i * max(-r_i, 0),
/// r = response - design * theta.
///
/// Quantile regression, its L1-penalized variants (penalty terms enter as
/// extra rows with zero response) and the LLA subproblems are all of this
/// form. `design` must have full column rank; weights must be positive.
struct AsymmetricL1Problem {
    Eigen::MatrixXd design;
    Eigen::VectorXd response;
    Eigen::VectorXd above;
    Eigen::VectorXd below;
};

struct InteriorPointOptions {
    double gap_tolerance = 1e-8;  ///< relative to 1 + |objective|
    int max_iterations = 200;
};

struct InteriorPointResult {
    Eigen::VectorXd theta;
    double objective = 0.0;
    double gap = 0.0;  ///< certified primal-dual gap at exit
    int iterations = 0;
    bool converged = false;
};

double asymmetric_l1_objective(const AsymmetricL1Problem& problem, const Eigen::VectorXd& theta);

/// Mehrotra predictor-corrector on the bounded dual
///   max b'a  s.t.  A'a = A'below,  0 <= a <= above + below,
/// followed by a projection that snaps numerically-zero residuals to
/// exact zeros whenever that does not raise the objective.
InteriorPointResult solve_asymmetric_l1(const AsymmetricL1Problem& problem,
                                        const InteriorPointOptions& options = {});

}  // namespace qrport
