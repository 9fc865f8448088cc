#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qrport/errors.hpp"
#include "qrport/rng.hpp"
#include "qrport/stats.hpp"
#include "qrport/tuning.hpp"
#include "support/synthetic.hpp"
#include "support/tuning_oracle.hpp"

using namespace qrport;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using namespace oracle;

TEST_CASE("BCH lambda matches a direct transcription bit for bit") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        const MatrixXd x = synth::normal_matrix(rng, 50, 3);
        BchParams params;
        params.seed = seed * 977;
        const double lam = bch_lambda(x, 0.05, params);
        CHECK(lam == bch_reference(x, 0.05, 1000, 2.0, 0.1, params.seed));
        CHECK(lam == bch_lambda(x, 0.05, params));
    }
}

TEST_CASE("BCH draws are nonnegative and lambda is linear in c") {
    std::mt19937_64 rng(3);
    const MatrixXd x = synth::normal_matrix(rng, 40, 4);
    BchParams params;
    params.seed = 11;
    for (double v : bch_draws(x, 0.05, params)) CHECK(v >= 0.0);
    const double base = bch_lambda(x, 0.05, params);
    params.c = 4.0;
    CHECK(bch_lambda(x, 0.05, params) == doctest::Approx(2.0 * base).epsilon(1e-15));
}

TEST_CASE("BCH spread shrinks with more draws") {
    std::mt19937_64 rng(5);
    const MatrixXd x = synth::normal_matrix(rng, 50, 3);
    auto spread = [&](int draws) {
        std::vector<double> values;
        for (std::uint64_t s = 0; s < 50; ++s) {
            BchParams params;
            params.draws = draws;
            params.seed = 1000 + s;
            values.push_back(bch_lambda(x, 0.05, params));
        }
        return sample_sd(values);
    };
    CHECK(spread(4000) < spread(250));
}

TEST_CASE("BCH rejects a constant column and bad parameters") {
    MatrixXd x = MatrixXd::Random(20, 3);
    x.col(1).setConstant(2.0);
    CHECK_THROWS_AS(bch_lambda(x, 0.05, BchParams{}), DataError);
    try {
        bch_lambda(x, 0.05, BchParams{});
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("column 1") != std::string::npos);
    }
    const MatrixXd ok = MatrixXd::Random(20, 2);
    BchParams bad;
    bad.c = 1.0;
    CHECK_THROWS_AS(bch_lambda(ok, 0.05, bad), UsageError);
    bad = {};
    bad.beta = 1.0;
    CHECK_THROWS_AS(bch_lambda(ok, 0.05, bad), UsageError);
    bad = {};
    bad.draws = 0;
    CHECK_THROWS_AS(bch_lambda(ok, 0.05, bad), UsageError);
}

TEST_CASE("BIC score fixtures") {
    struct Fixture {
        Index t, d;
        double loss, c_t, expected;
    };
    const Fixture fixtures[] = {
        {100, 0, 0.5, 0.0, 0.0},
        {100, 3, 0.8, 0.0, 0.7881175158744396},
        {50, 2, 1.3, 1.0, 1.0337519051359993},
        {200, 5, 2.7, 0.0, 2.0373010400285354},
        {60, 1, 0.05, 2.5, -2.2172862479477518},
    };
    std::mt19937_64 rng(17);
    for (const auto& f : fixtures) {
        const double tau = 0.5;
        const MatrixXd x = synth::normal_matrix(rng, f.t, f.d);
        QuantileFit fit;
        fit.intercept = 0.25;
        fit.coefficients = VectorXd::LinSpaced(f.d, 0.5, 1.5);
        const double resid = 2.0 * f.loss / static_cast<double>(f.t);
        const VectorXd y = (x * fit.coefficients).array() + fit.intercept + resid;
        BicParams params;
        params.c_t = f.c_t;
        const BicScore s = bic_score(y, x, tau, fit, params, f.t);
        CHECK(std::abs(s.score - f.expected) < 1e-9);
        CHECK(s.nu_hat == doctest::Approx(f.loss / static_cast<double>(f.t)));
        CHECK_FALSE(s.perfect_fit);
    }
}

TEST_CASE("BIC score flags a perfect fit and grows with the support at equal loss") {
    MatrixXd x(4, 1);
    x << 1, 2, 3, 4;
    const VectorXd y = 2.0 * x.col(0);
    QuantileFit fit;
    fit.coefficients = VectorXd::Constant(1, 2.0);
    const BicScore perfect = bic_score(y, x, 0.05, fit, {}, 4);
    CHECK(perfect.perfect_fit);
    CHECK(std::isfinite(perfect.score));

    std::mt19937_64 rng(2);
    const MatrixXd x3 = synth::normal_matrix(rng, 80, 3);
    QuantileFit with_zero;
    with_zero.intercept = 0.1;
    with_zero.coefficients = VectorXd::Zero(3);
    with_zero.coefficients(0) = 1.0;
    const VectorXd y3 = VectorXd::Constant(80, 0.1) + x3.col(0) + synth::normal_matrix(rng, 80, 1);
    QuantileFit reduced = with_zero;
    reduced.coefficients = with_zero.coefficients.head(1);
    const BicScore full = bic_score(y3, x3, 0.05, with_zero, {}, 80);
    const BicScore small = bic_score(y3, x3.leftCols(1), 0.05, reduced, {}, 80);
    CHECK(small.loss_sum == full.loss_sum);
    CHECK(small.score < full.score);
}

TEST_CASE("fold assignment is a balanced, reproducible partition") {
    for (Index t : {10, 23, 60, 101}) {
        const std::vector<int> fold = fold_assignment(t, 5, 99);
        std::vector<int> sizes(5, 0);
        for (int f : fold) {
            REQUIRE(f >= 0);
            REQUIRE(f < 5);
            ++sizes[static_cast<std::size_t>(f)];
        }
        CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
        CHECK(fold == fold_assignment(t, 5, 99));
    }
    CHECK(fold_assignment(13, 3, 5) == reference_folds(13, 3, 5));
    CHECK(fold_assignment(101, 5, 8) == reference_folds(101, 5, 8));
    CHECK_THROWS_AS(fold_assignment(4, 5, 1), UsageError);
    CHECK_THROWS_AS(fold_assignment(4, 1, 1), UsageError);
}

TEST_CASE("K-fold CV matches a nested-loop reference") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto inst = synth::regression(seed, 60, 3);
        const VectorXd w = lasso_scale_weights(inst.x, 0.05);
        CvParams params;
        params.seed = seed + 40;
        params.grid = lambda_grid(inst.y, inst.x, 0.05, 10, w);
        const CvResult got = kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params);
        const CvReference ref = cv_reference(inst.y, inst.x, 0.05, params.grid,
                                             reference_folds(60, 5, params.seed), 5);
        CHECK(got.lambda == ref.lambda);
        for (std::size_t g = 0; g < ref.curve.size(); ++g) {
            CHECK(got.valid[g]);
            CHECK(got.curve[g] == doctest::Approx(ref.curve[g]).epsilon(1e-12));
        }
    }
}

TEST_CASE("K-fold CV trivial grids and errors") {
    const auto inst = synth::regression(8, 40, 3);
    CvParams params;
    params.seed = 3;
    params.grid = {0.7};
    CHECK(kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params).lambda == 0.7);

    params.grid = lambda_grid(inst.y, inst.x, 0.05, 8, lasso_scale_weights(inst.x, 0.05));
    const double plain = kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params).lambda;
    std::vector<double> doubled;
    for (double v : params.grid) {
        doubled.push_back(v);
        doubled.push_back(v);
    }
    params.grid = doubled;
    CHECK(kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params).lambda == plain);

    params.folds = 41;
    CHECK_THROWS_AS(kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params), UsageError);
    params.folds = 5;
    CHECK_THROWS_AS(kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::none}, params), UsageError);
    params.grid.clear();
    CHECK_THROWS_AS(kfold_cv(inst.y, inst.x, 0.05, PenaltySpec{PenaltyKind::lasso}, params), UsageError);
}

TEST_CASE("CV loss at the fold-aware top equals the intercept-only validation loss") {
    for (PenaltyKind kind : {PenaltyKind::lasso, PenaltyKind::scad, PenaltyKind::mcp}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto inst = synth::regression(seed * 13, 50, 4);
            const double tau = 0.05;
            CvParams params;
            params.seed = seed;
            params.grid = log_grid(cv_lambda_max(inst.y, inst.x, tau, kind, 5, seed), 3);
            PenaltySpec spec{kind};
            spec.a = kind == PenaltyKind::mcp ? 3.0 : 3.7;
            const CvResult cv = kfold_cv(inst.y, inst.x, tau, spec, params);

            const std::vector<int> fold = fold_assignment(50, 5, seed);
            double total = 0.0;
            for (int f = 0; f < 5; ++f) {
                std::vector<double> train;
                for (Index i = 0; i < 50; ++i)
                    if (fold[static_cast<std::size_t>(i)] != f) train.push_back(inst.y(i));
                const double mu = type1_quantile(train, tau);
                double loss = 0.0;
                int n = 0;
                for (Index i = 0; i < 50; ++i) {
                    if (fold[static_cast<std::size_t>(i)] != f) continue;
                    loss += check_loss(inst.y(i) - mu, tau);
                    ++n;
                }
                total += loss / n;
            }
            CHECK(cv.curve[0] == doctest::Approx(total / 5).epsilon(1e-9));
            for (std::size_t g = 0; g < cv.curve.size(); ++g) CHECK(std::isfinite(cv.curve[g]));
        }
    }
}

TEST_CASE("lambda grid shape and emptiness at the top") {
    const auto inst = synth::regression(21, 70, 5);
    const VectorXd w = lasso_scale_weights(inst.x, 0.05);
    const std::vector<double> two = lambda_grid(inst.y, inst.x, 0.05, 2, w);
    REQUIRE(two.size() == 2);
    CHECK(two[1] == doctest::Approx(two[0] * 1e-4).epsilon(1e-14));
    const std::vector<double> grid = lambda_grid(inst.y, inst.x, 0.05, 100, w);
    CHECK(grid.size() == 100);
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] < grid[k - 1]);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto r = synth::regression(seed + 300, 30 + static_cast<Index>(seed), 4);
        if (seed % 3 == 0) r.y = r.y.array().round();  // ties at the quantile
        for (double tau : {0.05, 0.3, 0.5}) {
            const VectorXd s = lasso_scale_weights(r.x, tau);
            const double top = lambda_max(r.y, r.x, tau, s);
            const QuantileFit fit = fit_qr_weighted_l1(r.y, r.x, tau, top, s);
            CHECK(fit.support(1e-5).empty());
            CHECK(fit.intercept == doctest::Approx(type1_quantile(as_span(r.y), tau)).epsilon(1e-9));
        }
    }
}

TEST_CASE("lambda grid rejects degenerate designs") {
    const VectorXd y = VectorXd::LinSpaced(20, 0, 1);
    const MatrixXd zero = MatrixXd::Zero(20, 2);
    CHECK_THROWS_AS(lambda_grid(y, zero, 0.05, 10, lasso_scale_weights(zero, 0.05)), DataError);
    CHECK_THROWS_AS(log_grid(1.0, 1), UsageError);
}

TEST_CASE("BIC search scores each distinct support once and picks the minimum") {
    const auto inst = synth::regression(31, 80, 5);
    const double tau = 0.05;
    const std::vector<double> grid = lambda_grid(inst.y, inst.x, tau, 30, lasso_scale_weights(inst.x, tau));
    const BicSearchResult res = bic_search(inst.y, inst.x, tau, grid, {});
    CHECK(res.supports_scored >= 2);
    CHECK(res.supports_scored <= grid.size());

    // Brute force over the same path.
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        const QuantileFit first = fit_qr_weighted_l1(inst.y, inst.x, tau, lambda, lasso_scale_weights(inst.x, tau));
        const auto support = first.support(1e-5);
        const QuantileFit refit = refit_support(inst.y, inst.x, support, tau);
        double loss = 0.0;
        const VectorXd r = refit.residuals(inst.y, inst.x);
        for (Index i = 0; i < r.size(); ++i) loss += check_loss(r(i), tau);
        const double score = std::log(2 * loss) + support.size() * std::log(80.0) / 160.0 * std::log(80.0);
        best = std::min(best, score);
    }
    CHECK(res.score.score == doctest::Approx(best).epsilon(1e-9));
    for (Index j = 0; j < inst.x.cols(); ++j) {
        if (std::find(res.support.begin(), res.support.end(), j) == res.support.end()) {
            CHECK(res.refit.coefficients(j) == 0.0);
        }
    }
}
