#include <doctest.h>

#include <atomic>
#include <cmath>

#include "qrport/backtest.hpp"
#include "qrport/errors.hpp"
#include "support/synthetic.hpp"

using namespace qrport;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
ReturnPanel panel_from(const MatrixXd& r) {
    ReturnPanel p;
    p.returns = r;
    for (Index j = 0; j < r.cols(); ++j) p.asset_ids.push_back("A" + std::to_string(j));
    const auto start = std::chrono::sys_days{std::chrono::year{2001} / 1 / 5};
    for (Index t = 0; t < r.rows(); ++t) p.week_ends.emplace_back(start + std::chrono::days{7 * t});
    return p;
}
}  // namespace

TEST_CASE("drift and wealth") {
    VectorXd w(2), r(2);
    w << 0.5, 0.5;
    r << 10, 0;
    const VectorXd d = drift_weights(w, r);
    CHECK(d(0) == doctest::Approx(0.55 / 1.05).epsilon(1e-15));
    CHECK(d(1) == doctest::Approx(0.5 / 1.05).epsilon(1e-15));
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-15));
    r << 3, 3;
    CHECK((drift_weights(w, r) - w).cwiseAbs().maxCoeff() < 1e-15);
    VectorXd m(2);
    m << 2, -1;
    r << -50, 100;
    CHECK_THROWS_AS(drift_weights(m, r), DataError);

    VectorXd ret(2);
    ret << 10, -10;
    const VectorXd wc = wealth_curve(ret, 1.0);
    CHECK(wc(0) == 1.0);
    CHECK(wc(1) == doctest::Approx(1.1));
    CHECK(wc(2) == doctest::Approx(0.99));
    CHECK((wealth_curve(VectorXd::Zero(5), 2.0).array() == 2.0).all());
}

TEST_CASE("EW roll on constant and toy panels") {
    MatrixXd c(10, 2);
    c.col(0).setConstant(1.5);
    c.col(1).setConstant(-0.5);
    const BacktestReport flat = roll(panel_from(c), 4, StrategySpec::from_label("EW"));
    CHECK(flat.oos_returns.size() == 6);
    for (Index k = 0; k < 6; ++k) CHECK(flat.oos_returns(k) == doctest::Approx(0.5).epsilon(1e-15));

    const MatrixXd toy = synth::returns_panel(4, 12, 3);
    const BacktestReport rep = roll(panel_from(toy), 8, StrategySpec::from_label("EW"));
    REQUIRE(rep.oos_returns.size() == 4);
    CHECK(rep.drifted_weights.rows() == 3);
    for (Index t = 8; t < 12; ++t) {
        double expect = 0.0;
        for (Index j = 0; j < 3; ++j) expect += toy(t, j) / 3.0;
        CHECK(rep.oos_returns(t - 8) == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(rep.oos_dates.front() == panel_from(toy).week_ends[8]);
}

TEST_CASE("roll plan and failure reporting") {
    CHECK(RollingPlan(100, 1006).windows() == 906);
    CHECK_THROWS_AS(RollingPlan(10, 10), UsageError);
    const MatrixXd toy = synth::returns_panel(4, 30, 3);
    try {
        roll(panel_from(toy), 10, StrategySpec::from_label("LBCH"));
        FAIL("expected a failure: windows shorter than 1/tau");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).rfind("window 0:", 0) == 0);
    }
    std::atomic<bool> stop{true};
    RollOptions opts;
    opts.abort = &stop;
    CHECK_THROWS_AS(roll(panel_from(toy), 10, StrategySpec::from_label("EW"), opts), Interrupted);
}

TEST_CASE("roll is identical across thread counts and recomputable") {
    const ReturnPanel p = panel_from(synth::returns_panel(21, 50, 4));
    for (const char* label : {"PLBCH", "LCV5", "PLBIC"}) {
        StrategySpec spec = StrategySpec::from_label(label);
        spec.grid_size = 10;
        RollOptions one;
        one.seed = 17;
        RollOptions many = one;
        many.threads = 4;
        const BacktestReport a = roll(p, 30, spec, one);
        const BacktestReport b = roll(p, 30, spec, many);
        CHECK(a.oos_returns == b.oos_returns);
        CHECK(a.weight_history == b.weight_history);
        for (Index k = 0; k < a.oos_returns.size(); ++k) {
            const double again = p.returns.row(30 + k).dot(a.weight_history.row(k));
            CHECK(std::abs(again - a.oos_returns(k)) <= 1e-12);
            CHECK(std::abs(a.weight_history.row(k).sum() - 1.0) < 1e-10);
        }
    }
}
