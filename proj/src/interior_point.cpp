#include "qrport/interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrport/errors.hpp"

namespace qrport {

namespace {

using Eigen::VectorXd;

constexpr double kStepFraction = 0.99995;

/// Largest step in [0, 1] keeping x + step * dx >= 0.
double max_step(const VectorXd& x, const VectorXd& dx) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (dx(i) < 0.0) step = std::min(step, -x(i) / dx(i));
    }
    return step;
}

class NormalEquations {
public:
    void factor(const Eigen::MatrixXd& a, const VectorXd& inv_d) {
        matrix_ = a.transpose() * inv_d.asDiagonal() * a;
        llt_.compute(matrix_);
        ridge_ = 0.0;
        if (llt_.info() == Eigen::Success) return;
        const double scale = std::max(matrix_.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        for (double r = 1e-14; r <= 1e-4; r *= 100.0) {
            Eigen::MatrixXd m = matrix_;
            m.diagonal().array() += r * scale;
            llt_.compute(m);
            if (llt_.info() == Eigen::Success) {
                ridge_ = r;
                return;
            }
        }
        throw NumericalError("interior point: normal equations are not positive definite");
    }

    VectorXd solve(const VectorXd& rhs) const { return llt_.solve(rhs); }

private:
    Eigen::MatrixXd matrix_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double ridge_ = 0.0;
};

/// Projects theta onto {A_Z theta = b_Z} for the near-zero residual set Z.
VectorXd snap_zero_residuals(const AsymmetricL1Problem& p, const VectorXd& theta,
                             double threshold) {
    const VectorXd r = p.response - p.design * theta;
    std::vector<Eigen::Index> zero;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (std::abs(r(i)) <= threshold) zero.push_back(i);
    }
    if (zero.empty()) return theta;
    Eigen::MatrixXd az(static_cast<Eigen::Index>(zero.size()), p.design.cols());
    VectorXd rz(static_cast<Eigen::Index>(zero.size()));
    for (std::size_t k = 0; k < zero.size(); ++k) {
        az.row(static_cast<Eigen::Index>(k)) = p.design.row(zero[k]);
        rz(static_cast<Eigen::Index>(k)) = r(zero[k]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(az);
    VectorXd snapped = theta + cod.solve(rz);
    // One refinement pass removes most of the remaining rounding error.
    const VectorXd r2 = p.response - p.design * snapped;
    for (std::size_t k = 0; k < zero.size(); ++k) rz(static_cast<Eigen::Index>(k)) = r2(zero[k]);
    snapped += cod.solve(rz);
    return snapped;
}

}  // namespace

double asymmetric_l1_objective(const AsymmetricL1Problem& p, const VectorXd& theta) {
    const VectorXd r = p.response - p.design * theta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        total += r(i) >= 0.0 ? p.above(i) * r(i) : -p.below(i) * r(i);
    }
    return total;
}

InteriorPointResult solve_asymmetric_l1(const AsymmetricL1Problem& p,
                                        const InteriorPointOptions& options) {
    const Eigen::MatrixXd& A = p.design;
    const VectorXd& b = p.response;
    const Eigen::Index n = A.rows();
    const Eigen::Index m = A.cols();
    if (b.size() != n || p.above.size() != n || p.below.size() != n) {
        throw UsageError("interior point: inconsistent problem dimensions");
    }
    if ((p.above.array() <= 0.0).any() || (p.below.array() <= 0.0).any()) {
        throw UsageError("interior point: residual weights must be positive");
    }
    if (!A.allFinite() || !b.allFinite()) throw NumericalError("interior point: non-finite input");

    InteriorPointResult result;
    if (m == 0) {
        result.theta = VectorXd(0);
        result.objective = asymmetric_l1_objective(p, result.theta);
        result.converged = true;
        return result;
    }

    const VectorXd upper = p.above + p.below;
    const VectorXd c = A.transpose() * p.below;

    // Dual start a = below is strictly inside the box and exactly feasible.
    VectorXd a = p.below;
    VectorXd s = p.above;
    VectorXd theta = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    if (!theta.allFinite()) theta.setZero(m);
    VectorXd r = b - A * theta;
    const double shift = 0.1 * r.cwiseAbs().mean() + 1e-10 * (1.0 + b.cwiseAbs().maxCoeff());
    VectorXd v = r.cwiseMax(0.0).array() + shift;     // positive residual part
    VectorXd z = (-r).cwiseMax(0.0).array() + shift;  // negative residual part

    VectorXd best_theta = theta;
    double best_obj = asymmetric_l1_objective(p, theta);
    double best_gap = std::numeric_limits<double>::infinity();

    NormalEquations normal;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const double primal = asymmetric_l1_objective(p, theta);
        const double dual = b.dot(a - p.below);
        const double gap = primal - dual;
        if (primal < best_obj || (primal == best_obj && gap < best_gap)) {
            best_obj = primal;
            best_theta = theta;
        }
        best_gap = std::min(best_gap, best_obj - dual);
        if (best_obj - dual <= options.gap_tolerance * (1.0 + std::abs(best_obj))) {
            result.converged = true;
            break;
        }

        const VectorXd rp = c - A.transpose() * a;
        const VectorXd rd = b - A * theta + z - v;
        const VectorXd d = z.cwiseQuotient(a) + v.cwiseQuotient(s);
        const VectorXd inv_d = d.cwiseInverse();
        normal.factor(A, inv_d);

        auto direction = [&](const VectorXd& raz, const VectorXd& rsv, VectorXd& da, VectorXd& dth,
                             VectorXd& dz, VectorXd& dv) {
            const VectorXd h = rd + raz.cwiseQuotient(a) - rsv.cwiseQuotient(s);
            dth = normal.solve(A.transpose() * h.cwiseProduct(inv_d) - rp);
            da = (h - A * dth).cwiseProduct(inv_d);
            dz = (raz - z.cwiseProduct(da)).cwiseQuotient(a);
            dv = (rsv + v.cwiseProduct(da)).cwiseQuotient(s);
        };

        // Predictor.
        VectorXd da, dth, dz, dv;
        const VectorXd az = a.cwiseProduct(z);
        const VectorXd sv = s.cwiseProduct(v);
        direction(-az, -sv, da, dth, dz, dv);
        const double mu = az.sum() + sv.sum();
        double step_p = std::min(max_step(a, da), max_step(s, -da));
        double step_d = std::min(max_step(z, dz), max_step(v, dv));
        const double mu_aff = (a + step_p * da).dot(z + step_d * dz) +
                              (s - step_p * da).dot(v + step_d * dv);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);
        const double target = sigma * mu / static_cast<double>(2 * n);

        // Corrector.
        const VectorXd raz = (target - az.array() - da.cwiseProduct(dz).array()).matrix();
        const VectorXd rsv = (target - sv.array() + da.cwiseProduct(dv).array()).matrix();
        direction(raz, rsv, da, dth, dz, dv);
        step_p = std::min(1.0, kStepFraction * std::min(max_step(a, da), max_step(s, -da)));
        step_d = std::min(1.0, kStepFraction * std::min(max_step(z, dz), max_step(v, dv)));

        a += step_p * da;
        s -= step_p * da;
        theta += step_d * dth;
        z += step_d * dz;
        v += step_d * dv;
        if (!theta.allFinite() || !a.allFinite()) {
            throw NumericalError("interior point: iterate became non-finite");
        }
    }

    {
        const double primal = asymmetric_l1_objective(p, theta);
        if (primal < best_obj) {
            best_obj = primal;
            best_theta = theta;
        }
        best_gap = std::min(best_gap, best_obj - b.dot(a - p.below));
    }

    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    for (double threshold : {1e-7 * scale, 1e-9 * scale}) {
        const VectorXd snapped = snap_zero_residuals(p, best_theta, threshold);
        const double obj = asymmetric_l1_objective(p, snapped);
        if (snapped.allFinite() && obj <= best_obj + 1e-12 * (1.0 + std::abs(best_obj))) {
            best_theta = snapped;
            best_obj = std::min(best_obj, obj);
            break;
        }
    }

    result.theta = best_theta;
    result.objective = asymmetric_l1_objective(p, best_theta);
    result.gap = std::max(best_gap, 0.0);
    result.iterations = iter;
    return result;
}

}  // namespace qrport
