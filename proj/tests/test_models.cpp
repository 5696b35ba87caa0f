#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "selrec/errors.hpp"
#include "selrec/models.hpp"
#include "selrec/pool.hpp"

using namespace selrec;

namespace {

Eigen::MatrixXd col_matrix(const std::vector<double>& xs) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) X(static_cast<Eigen::Index>(i), 0) = xs[i];
    return X;
}

Eigen::VectorXd vec(const std::vector<double>& xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
    return v;
}

// Five observations, no ties: times 1..5, events (1,1,0,1,0),
// covariate (0.5,-0.2,0.3,-0.1,0.4). Score and information at beta=0 are
// hand-computable; the MLE and its loglik come from an independent
// high-precision optimization and are frozen here.
struct CoxOracle {
    Eigen::MatrixXd X = col_matrix({0.5, -0.2, 0.3, -0.1, 0.4});
    Eigen::VectorXd time = vec({1.0, 2.0, 3.0, 4.0, 5.0});
    std::vector<unsigned char> event{1, 1, 0, 1, 0};
    double score0 = -0.23;
    double info0 = 0.2051;
    double beta_hat = -1.13214715031976;
    double loglik_hat = -3.55968415342952;
};

}  // namespace

TEST_CASE("cox score and information at zero match hand values") {
    const CoxOracle oracle;
    const CoxObjective obj(oracle.X, oracle.time, oracle.event, CoxTies::Efron);
    const Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(1);
    CHECK(obj.gradient(beta0)[0] == doctest::Approx(oracle.score0).epsilon(1e-12));
    CHECK(obj.information(beta0)(0, 0) == doctest::Approx(oracle.info0).epsilon(1e-12));
}

TEST_CASE("cox fit reproduces the frozen MLE") {
    const CoxOracle oracle;
    for (CoxTies ties : {CoxTies::Efron, CoxTies::Breslow}) {  // no ties: identical
        const FittedModel model = fit_cox(oracle.X, oracle.time, oracle.event, ties);
        CHECK(model.converged);
        // Newton stops on score < 1e-8, so the coefficient carries an
        // O(score_tol / information) offset from the exact maximizer; the
        // loglik is flat there and reproduces many more digits.
        CHECK(model.coefficients[0] == doctest::Approx(oracle.beta_hat).epsilon(1e-6));
        CHECK(model.loglik == doctest::Approx(oracle.loglik_hat).epsilon(1e-9));
        CHECK(model.wald_z[0] ==
              doctest::Approx(model.coefficients[0] / std::sqrt(model.covariance(0, 0)))
                  .epsilon(1e-12));
    }
}

TEST_CASE("cox MLE maximizes the partial likelihood on a grid") {
    const CoxOracle oracle;
    const CoxObjective obj(oracle.X, oracle.time, oracle.event, CoxTies::Efron);
    const FittedModel model = fit_cox(oracle.X, oracle.time, oracle.event);
    double best = -1e300, best_beta = 0.0;
    for (double b = -3.0; b <= 3.0; b += 1e-3) {
        const double v = obj.value(Eigen::VectorXd::Constant(1, b));
        if (v > best) {
            best = v;
            best_beta = b;
        }
    }
    CHECK(std::fabs(model.coefficients[0] - best_beta) < 2e-3);
    CHECK(model.loglik >= best - 1e-10);
}

TEST_CASE("efron and breslow tie handling at beta = 0") {
    // Times (1,1,2), events (1,1,0): risk sets of size 3 for the tied pair.
    // Breslow: ll(0) = -2 log 3. Efron: ll(0) = -(log 3 + log 2).
    const Eigen::MatrixXd X = col_matrix({0.2, -0.1, 0.3});
    const Eigen::VectorXd time = vec({1.0, 1.0, 2.0});
    const std::vector<unsigned char> event{1, 1, 0};
    const CoxObjective breslow(X, time, event, CoxTies::Breslow);
    const CoxObjective efron(X, time, event, CoxTies::Efron);
    const Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(1);
    CHECK(breslow.value(beta0) == doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-14));
    CHECK(efron.value(beta0) ==
          doctest::Approx(-(std::log(3.0) + std::log(2.0))).epsilon(1e-14));
    // With ties the two rules genuinely differ away from zero.
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.7);
    CHECK(breslow.value(b) != efron.value(b));
}

TEST_CASE("cox fit depends only on the time ordering") {
    const CoxOracle oracle;
    Eigen::VectorXd warped = oracle.time;
    for (Eigen::Index i = 0; i < warped.size(); ++i) {
        warped[i] = warped[i] * warped[i] * warped[i] + 1.0;  // strictly monotone
    }
    const FittedModel a = fit_cox(oracle.X, oracle.time, oracle.event);
    const FittedModel b = fit_cox(oracle.X, warped, oracle.event);
    CHECK(a.coefficients[0] == b.coefficients[0]);  // bit-identical
    CHECK(a.loglik == b.loglik);
}

TEST_CASE("logistic fit reproduces the frozen MLE") {
    const Eigen::MatrixXd X = col_matrix({-1.2, -0.5, -0.1, 0.4, 0.9, 1.5});
    const Eigen::VectorXd y = vec({-1.0, -1.0, 1.0, -1.0, 1.0, 1.0});
    const FittedModel model = fit_logistic(X, y);
    CHECK(model.converged);
    CHECK(model.coefficients[0] == doctest::Approx(-0.39905457079851).epsilon(1e-6));
    CHECK(model.coefficients[1] == doctest::Approx(2.39418783544383).epsilon(1e-6));
    CHECK(model.p_values[1] > 0.05);  // six points cannot be significant
}

TEST_CASE("logistic label flip negates the coefficients") {
    const Eigen::MatrixXd X = col_matrix({-1.2, -0.5, -0.1, 0.4, 0.9, 1.5});
    const Eigen::VectorXd y = vec({-1.0, -1.0, 1.0, -1.0, 1.0, 1.0});
    const FittedModel plus = fit_logistic(X, y);
    const FittedModel minus = fit_logistic(X, -y);
    CHECK(plus.coefficients[0] == doctest::Approx(-minus.coefficients[0]).epsilon(1e-6));
    CHECK(plus.coefficients[1] == doctest::Approx(-minus.coefficients[1]).epsilon(1e-6));
}

TEST_CASE("analytic derivatives match finite differences") {
    const double fd_step = 1e-5;

    // Logistic with two covariates at a nonzero point.
    Eigen::MatrixXd X(6, 2);
    X << -1.2, 0.3, -0.5, -0.8, -0.1, 1.1, 0.4, -0.2, 0.9, 0.6, 1.5, -1.0;
    const Eigen::VectorXd y = vec({-1.0, -1.0, 1.0, -1.0, 1.0, 1.0});
    const LogisticObjective lobj(
        [&] {
            Eigen::MatrixXd Z(6, 3);
            Z.col(0).setOnes();
            Z.rightCols(2) = X;
            return Z;
        }(),
        y);
    const Eigen::VectorXd w = vec({0.3, -0.7, 0.4});
    const Eigen::VectorXd lg = lobj.gradient(w);
    const Eigen::MatrixXd li = lobj.information(w);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        Eigen::VectorXd hi = w, lo = w;
        hi[j] += fd_step;
        lo[j] -= fd_step;
        const double fd = (lobj.value(hi) - lobj.value(lo)) / (2.0 * fd_step);
        CHECK(lg[j] == doctest::Approx(fd).epsilon(1e-4));
        const Eigen::VectorXd gfd = (lobj.gradient(hi) - lobj.gradient(lo)) / (2.0 * fd_step);
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            CHECK(-li(k, j) == doctest::Approx(gfd[k]).epsilon(1e-4));
        }
    }

    // Cox with a tied event group so the Efron terms are exercised.
    const Eigen::MatrixXd cx = col_matrix({0.5, -0.2, 0.3, -0.1, 0.4, 0.7});
    const Eigen::VectorXd ct = vec({1.0, 2.0, 2.0, 3.0, 4.0, 5.0});
    const std::vector<unsigned char> ce{1, 1, 1, 0, 1, 0};
    const CoxObjective cobj(cx, ct, ce, CoxTies::Efron);
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.4);
    Eigen::VectorXd bh = beta, bl = beta;
    bh[0] += fd_step;
    bl[0] -= fd_step;
    const double cfd = (cobj.value(bh) - cobj.value(bl)) / (2.0 * fd_step);
    CHECK(cobj.gradient(beta)[0] == doctest::Approx(cfd).epsilon(1e-4));
    const double cgfd = (cobj.gradient(bh)[0] - cobj.gradient(bl)[0]) / (2.0 * fd_step);
    CHECK(-cobj.information(beta)(0, 0) == doctest::Approx(cgfd).epsilon(1e-4));
}

TEST_CASE("separation is detected and reported") {
    const Eigen::MatrixXd X = col_matrix({-2.0, -1.0, 1.0, 2.0});
    const Eigen::VectorXd y = vec({-1.0, -1.0, 1.0, 1.0});
    const FittedModel model = try_fit_logistic(X, y);
    CHECK(!model.converged);
    CHECK(model.status == FitStatus::Separation);
    CHECK_THROWS_AS(fit_logistic(X, y), SeparationDetected);
}

TEST_CASE("monotone cox likelihood is detected and reported") {
    // Covariate strictly decreasing in event time, all events observed.
    const Eigen::MatrixXd X = col_matrix({2.5, 1.5, 0.5, -0.5, -1.5, -2.5});
    const Eigen::VectorXd time = vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    const std::vector<unsigned char> event{1, 1, 1, 1, 1, 1};
    const FittedModel model = try_fit_cox(X, time, event);
    CHECK(!model.converged);
    CHECK(model.status == FitStatus::Monotone);
    CHECK_THROWS_AS(fit_cox(X, time, event), MonotoneLikelihood);
}

TEST_CASE("rank-deficient designs report singular information") {
    Eigen::MatrixXd X(6, 2);
    X << 0.5, 1.0, -0.2, -0.4, 0.3, 0.6, -0.1, -0.2, 0.4, 0.8, 0.7, 1.4;  // col2 = 2 col1
    const Eigen::VectorXd time = vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    const std::vector<unsigned char> event{1, 1, 0, 1, 0, 1};
    const FittedModel model = try_fit_cox(X, time, event);
    CHECK(!model.converged);
    CHECK(model.status == FitStatus::Singular);
    CHECK_THROWS_AS(fit_cox(X, time, event), SingularInformation);

    const Eigen::VectorXd y = vec({-1.0, 1.0, -1.0, 1.0, -1.0, 1.0});
    CHECK_THROWS_AS(fit_logistic(X, y), SingularInformation);
}

TEST_CASE("all-censored samples are rejected up front") {
    const Eigen::MatrixXd X = col_matrix({0.5, -0.2, 0.3});
    const Eigen::VectorXd time = vec({1.0, 2.0, 3.0});
    const std::vector<unsigned char> censored{0, 0, 0};
    CHECK_THROWS_AS(try_fit_cox(X, time, censored), NoEvents);
    CHECK_THROWS_AS(fit_cox(X, time, censored), NoEvents);
}

TEST_CASE("significance and standard errors") {
    const CoxOracle oracle;
    const FittedModel model = fit_cox(oracle.X, oracle.time, oracle.event);
    const Eigen::VectorXd se = standard_errors(model);
    CHECK(se[0] == doctest::Approx(std::sqrt(model.covariance(0, 0))).epsilon(1e-15));

    const SignificanceReport report = significance(model, 0.05);
    REQUIRE(report.significant.size() == 1);
    CHECK((report.significant[0] != 0) == (model.p_values[0] < 0.05));
    CHECK_THROWS_AS(significance(model, 1.5), InvalidValue);

    FittedModel broken;
    CHECK_THROWS_AS(significance(broken, 0.05), UnconvergedModel);
    CHECK_THROWS_AS(standard_errors(broken), UnconvergedModel);
}

TEST_CASE("pool glue dispatches on the outcome kind") {
    Pool pool({{"x", CovariateKind::Continuous}},
              {{-1.2, -0.5, -0.1, 0.4, 0.9, 1.5}});
    CHECK_THROWS_AS(fit_pool_model(pool), SpecMismatch);

    pool.attach_binary_outcome({-1.0, -1.0, 1.0, -1.0, 1.0, 1.0});
    const FittedModel logit = fit_pool_model(pool);
    CHECK(logit.kind == ModelKind::Logistic);
    CHECK(logit.coefficients.size() == 2);
    CHECK(logit.coefficients[1] == doctest::Approx(2.39418783544383).epsilon(1e-6));

    Pool surv({{"x", CovariateKind::Continuous}}, {{0.5, -0.2, 0.3, -0.1, 0.4}});
    surv.attach_survival_outcome({1.0, 2.0, 3.0, 4.0, 5.0}, {1, 1, 0, 1, 0});
    const FittedModel cox = fit_pool_model(surv);
    CHECK(cox.kind == ModelKind::Cox);
    CHECK(cox.coefficients[0] == doctest::Approx(-1.13214715031976).epsilon(1e-6));

    const Eigen::MatrixXd X = covariate_matrix(surv);
    CHECK(X.rows() == 5);
    CHECK(X.cols() == 1);
    CHECK(X(1, 0) == -0.2);
}
