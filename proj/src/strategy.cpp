#include "qrport/strategy.hpp"

#include <chrono>
#include <cmath>

#include "qrport/errors.hpp"
#include "qrport/metrics.hpp"
#include "qrport/rng.hpp"

namespace qrport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(Selector selector) {
    switch (selector) {
        case Selector::none: return "none";
        case Selector::bch: return "bch";
        case Selector::cv: return "cv";
        case Selector::bic: return "bic";
    }
    return "?";
}

const std::vector<std::string>& strategy_labels() {
    static const std::vector<std::string> labels = {"LBCH",  "LCV5", "PLBCH", "PLCV5", "PLBIC",
                                                    "SCV5",  "PSCV5", "MCV5", "PMCV5", "EW"};
    return labels;
}

StrategySpec StrategySpec::from_label(std::string_view label) {
    struct Row {
        std::string_view label;
        PenaltyKind penalty;
        Selector selector;
        bool refit;
    };
    static constexpr Row rows[] = {
        {"LBCH", PenaltyKind::lasso, Selector::bch, false},
        {"LCV5", PenaltyKind::lasso, Selector::cv, false},
        {"PLBCH", PenaltyKind::lasso, Selector::bch, true},
        {"PLCV5", PenaltyKind::lasso, Selector::cv, true},
        {"PLBIC", PenaltyKind::lasso, Selector::bic, true},
        {"SCV5", PenaltyKind::scad, Selector::cv, false},
        {"PSCV5", PenaltyKind::scad, Selector::cv, true},
        {"MCV5", PenaltyKind::mcp, Selector::cv, false},
        {"PMCV5", PenaltyKind::mcp, Selector::cv, true},
        {"EW", PenaltyKind::none, Selector::none, false},
    };
    for (const Row& row : rows) {
        if (row.label == label) {
            StrategySpec spec;
            spec.label = std::string(label);
            spec.penalty = row.penalty;
            spec.selector = row.selector;
            spec.post_refit = row.refit;
            return spec;
        }
    }
    throw UsageError("unknown strategy label '" + std::string(label) + "'");
}

double StrategySpec::resolved_a() const {
    if (penalty_a > 0.0) return penalty_a;
    return penalty == PenaltyKind::mcp ? 3.0 : 3.7;
}

void StrategySpec::validate() const {
    const StrategySpec row = from_label(label);
    if (row.penalty != penalty || row.selector != selector || row.post_refit != post_refit) {
        throw UsageError("strategy '" + label + "' does not match its table definition");
    }
    validate_tau(tau);
    if (!(eta >= 0.0)) throw UsageError("eta must be >= 0");
    if (selector == Selector::bch) bch.validate();
    if (selector == Selector::cv && cv.folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    if (selector == Selector::cv || selector == Selector::bic) {
        if (grid_size < 2) throw UsageError("lambda grid needs at least 2 points");
        if (!(grid_floor > 0.0 && grid_floor < 1.0)) throw UsageError("grid floor must lie in (0, 1)");
    }
    if (bic.c_t < 0.0) throw UsageError("BIC constant C_T must be positive");
    PenaltySpec check{penalty, 0.0, resolved_a(), {}};
    check.validate(0);
}

Index select_reference_asset(const MatrixXd& window, double tau) {
    if (window.cols() == 0) throw UsageError("window has no assets");
    Index best = 0;
    double best_es = 0.0;
    for (Index j = 0; j < window.cols(); ++j) {
        const VectorXd col = window.col(j);
        const double es = expected_shortfall({col.data(), static_cast<std::size_t>(col.size())}, tau);
        if (j == 0 || es < best_es) {
            best = j;
            best_es = es;
        }
    }
    return best;
}

DesignPair build_design(const MatrixXd& window, Index s) {
    if (s < 0 || s >= window.cols()) throw UsageError("reference asset index out of range");
    DesignPair d;
    d.reference = s;
    d.y = window.col(s);
    d.x.resize(window.rows(), window.cols() - 1);
    Index c = 0;
    for (Index j = 0; j < window.cols(); ++j) {
        if (j == s) continue;
        d.x.col(c++) = window.col(s) - window.col(j);
        d.column_map.push_back(j);
    }
    return d;
}

PortfolioWeights recover_weights(const QuantileFit& fit, const DesignPair& design, Index assets, double eta) {
    if (fit.coefficients.size() != static_cast<Index>(design.column_map.size()) ||
        assets != static_cast<Index>(design.column_map.size()) + 1) {
        throw UsageError("fit does not match the design");
    }
    PortfolioWeights out;
    out.weights = VectorXd::Zero(assets);
    double others = 0.0;
    const Index s = design.reference;
    for (std::size_t k = 0; k < design.column_map.size(); ++k) {
        const Index j = design.column_map[k];
        out.weights(j) = fit.coefficients(static_cast<Index>(k));
        others += fit.coefficients(static_cast<Index>(k));
    }
    out.weights(s) = 1.0 - others;
    out.reference_index = s;
    for (Index j = 0; j < assets; ++j) {
        if (std::abs(out.weights(j)) > eta) ++out.support_size;
    }
    return out;
}

QuantileFit post_refit(const DesignPair& design, const QuantileFit& first_stage, double eta, double tau,
                       const SolverOptions& options) {
    return refit_support(design.y, design.x, first_stage.support(eta), tau, options);
}

namespace {

QuantileFit penalized_fit(const DesignPair& d, const StrategySpec& spec, double lambda,
                          const SolverOptions& options) {
    if (spec.penalty == PenaltyKind::lasso) {
        return fit_qr_weighted_l1(d.y, d.x, spec.tau, lambda, lasso_scale_weights(d.x, spec.tau), options);
    }
    PenaltySpec p{spec.penalty, lambda, spec.resolved_a(), {}};
    return fit_qr_nonconvex(d.y, d.x, spec.tau, p, options);
}

}  // namespace

WindowResult run_strategy_window(const MatrixXd& window, const StrategySpec& spec, std::uint64_t seed,
                                 const SolverOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const Index n = window.cols();
    if (n < 2) throw DataError("a window needs at least 2 assets");
    WindowResult out;
    WindowDiagnostics& diag = out.diagnostics;

    if (spec.selector == Selector::none) {
        out.weights.weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        out.weights.support_size = 0;
        for (Index j = 0; j < n; ++j) {
            if (std::abs(out.weights.weights(j)) > spec.eta) ++out.weights.support_size;
        }
    } else {
        const Index s = select_reference_asset(window, spec.tau);
        const DesignPair design = build_design(window, s);
        diag.reference_index = s;

        QuantileFit first;
        QuantileFit final_fit;
        bool have_final = false;
        switch (spec.selector) {
            case Selector::bch: {
                BchParams bch = spec.bch;
                bch.seed = substream(seed, 0);
                diag.lambda = bch_lambda(design.x, spec.tau, bch);
                first = penalized_fit(design, spec, diag.lambda, options);
                break;
            }
            case Selector::cv: {
                CvParams cv = spec.cv;
                cv.seed = substream(seed, 1);
                if (cv.grid.empty()) {
                    cv.grid = log_grid(cv_lambda_max(design.y, design.x, spec.tau, spec.penalty, cv.folds, cv.seed),
                                       spec.grid_size, spec.grid_floor);
                }
                PenaltySpec p{spec.penalty, 0.0, spec.resolved_a(), {}};
                const CvResult res = kfold_cv(design.y, design.x, spec.tau, p, cv, options);
                diag.lambda = res.lambda;
                diag.cv_grid = cv.grid;
                diag.cv_curve = res.curve;
                first = penalized_fit(design, spec, diag.lambda, options);
                break;
            }
            case Selector::bic: {
                const std::vector<double> grid =
                    lambda_grid(design.y, design.x, spec.tau, spec.grid_size,
                                lasso_scale_weights(design.x, spec.tau), spec.grid_floor);
                BicParams bic = spec.bic;
                bic.eta = spec.eta;
                const BicSearchResult res = bic_search(design.y, design.x, spec.tau, grid, bic, options);
                diag.lambda = res.lambda;
                first = res.first_stage;
                final_fit = res.refit;
                have_final = true;
                break;
            }
            case Selector::none:
                break;
        }
        diag.selected = static_cast<Index>(first.support(spec.eta).size());
        diag.iterations = first.iterations;
        diag.lla_steps = first.lla_steps;
        diag.converged = first.converged;
        if (spec.post_refit && !have_final) {
            final_fit = post_refit(design, first, spec.eta, spec.tau, options);
            have_final = true;
        }
        if (have_final) {
            diag.iterations += final_fit.iterations;
            diag.converged = diag.converged && final_fit.converged;
        }
        out.weights = recover_weights(have_final ? final_fit : first, design, n, spec.eta);
    }
    diag.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace qrport
