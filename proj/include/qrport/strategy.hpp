#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qrport/qr_solver.hpp"
#include "qrport/tuning.hpp"

namespace qrport {

enum class Selector { none, bch, cv, bic };

const char* to_string(Selector selector);

struct StrategySpec {
    std::string label;
    PenaltyKind penalty = PenaltyKind::none;
    Selector selector = Selector::none;
    bool post_refit = false;
    double tau = 0.05;
    double eta = 1e-5;
    double penalty_a = 0.0;  ///< 0 picks 3.7 for SCAD and 3 for MCP
    BchParams bch;
    CvParams cv;  ///< an empty grid is built per window
    BicParams bic;
    int grid_size = 100;
    double grid_floor = 1e-4;

    /// One of LBCH, LCV5, PLBCH, PLCV5, PLBIC, SCV5, PSCV5, MCV5, PMCV5, EW.
    static StrategySpec from_label(std::string_view label);

    double resolved_a() const;
    void validate() const;
};

/// Every label in table order.
const std::vector<std::string>& strategy_labels();

struct PortfolioWeights {
    Eigen::VectorXd weights;
    Eigen::Index reference_index = -1;  ///< -1 for the equally weighted portfolio
    Eigen::Index support_size = 0;      ///< count of |w_j| > eta over all assets
};

struct DesignPair {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::vector<Eigen::Index> column_map;  ///< regressor column -> asset index
    Eigen::Index reference = 0;             ///< s
};

/// Asset with the lowest in-window expected shortfall; ties go to the lowest index.
Eigen::Index select_reference_asset(const Eigen::MatrixXd& window, double tau);

/// y = r_s and one column r_s - r_j for each other asset, in asset order.
DesignPair build_design(const Eigen::MatrixXd& window, Eigen::Index s);

PortfolioWeights recover_weights(const QuantileFit& fit, const DesignPair& design, Eigen::Index assets,
                                 double eta);

/// Unpenalized refit on {j : |coef_j| > eta}.
QuantileFit post_refit(const DesignPair& design, const QuantileFit& first_stage, double eta, double tau,
                       const SolverOptions& options = {});

struct WindowDiagnostics {
    double lambda = 0.0;
    Eigen::Index reference_index = -1;
    Eigen::Index selected = 0;  ///< first-stage support size
    int iterations = 0;
    int lla_steps = 0;
    bool converged = true;
    double runtime_seconds = 0.0;
    std::vector<double> cv_grid;
    std::vector<double> cv_curve;
};

struct WindowResult {
    PortfolioWeights weights;
    WindowDiagnostics diagnostics;
};

/// Weights for one estimation window. `seed` feeds the BCH draws and the CV
/// folds through separate sub-streams.
WindowResult run_strategy_window(const Eigen::MatrixXd& window, const StrategySpec& spec,
                                 std::uint64_t seed, const SolverOptions& options = {});

}  // namespace qrport
