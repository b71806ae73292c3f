#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "amip/certify.hpp"
#include "amip/influence.hpp"
#include "amip/metrics.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace amip;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("two-point regression constants and bounds") {
    const RegressionProblem prob = oracle::toy_problem();
    const FitResult f = fit(prob, WeightVector::ones(2));
    const std::vector<Eigen::Index> drop{0};
    const WeightVector w = WeightVector::dropping(2, drop);
    const CertificateConstants c = compute_constants(prob, f, w);
    CHECK(c.alpha == 0.5);
    CHECK(c.c_op == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(c.xi1 == doctest::Approx(1.0));
    CHECK(c.xi2 == doctest::Approx(0.8));
    CHECK(c.condition_value == doctest::Approx(0.2));
    CHECK(c.linear_change == doctest::Approx(0.16));

    const ErrorCertificate cert = certify_theta(prob, f, w);
    REQUIRE(cert.valid);
    // Hand values: k = 2 (0.5)^2 (0.6)^2 = 0.18, C_ball = (0.16 + 0.144) / 0.82.
    CHECK(cert.constants.c_ball == doctest::Approx(0.304 / 0.82).epsilon(1e-12));
    CHECK(cert.bound_lin == doctest::Approx(0.18 * (0.8 + 0.304 / 0.82)).epsilon(1e-12));
    CHECK(cert.bound_diff == doctest::Approx(0.2 * (0.8 + 0.304 / 0.82)).epsilon(1e-12));
    CHECK(std::abs(2.0 - 1.96) <= cert.bound_lin);
    CHECK(0.2 <= cert.bound_diff);

    const ErrorCertificate q = certify_qoi(prob, f, w, QuantityOfInterest::parameter(0));
    REQUIRE(q.qoi_bound);
    CHECK(q.qoi_bound->bound_lin == doctest::Approx(cert.bound_lin));
    CHECK(q.qoi_bound->bound_diff == doctest::Approx(cert.bound_diff));
}

TEST_CASE("empty drop set certifies trivially") {
    const RegressionProblem prob = oracle::toy_problem();
    const FitResult f = fit(prob, WeightVector::ones(2));
    const ErrorCertificate cert = certify_theta(prob, f, WeightVector::ones(2));
    CHECK(cert.valid);
    CHECK(cert.bound_lin == 0.0);
    CHECK(cert.bound_diff == 0.0);
    CHECK(cert.constants.alpha == 0.0);
}

TEST_CASE("operator norm agrees with a singular value decomposition") {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        const RegressionProblem prob = rep % 2 ? oracle::random_iv(rng, 50, 4) : oracle::random_ols(rng, 50, 4);
        const FitResult f = fit(prob, WeightVector::ones(50));
        const MatrixXd m = prob.instruments().transpose() * prob.x / 50.0;
        const double expected = 1.0 / Eigen::JacobiSVD<MatrixXd>(m).singularValues().minCoeff();
        CHECK(compute_constants(prob, f, WeightVector::ones(50)).c_op == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("homogeneous design gives a constant xi1") {
    ProblemData d;
    d.x.resize(6, 1);
    d.x << 2, -2, 2, -2, 2, 2;
    d.y.resize(6);
    d.y << 1, 0, 3, -1, 5, 2;
    const RegressionProblem prob = make_problem(std::move(d));
    const FitResult f = fit(prob, WeightVector::ones(6));
    for (Eigen::Index i = 0; i < 6; ++i) {
        const std::vector<Eigen::Index> drop{i};
        CHECK(compute_constants(prob, f, WeightVector::dropping(6, drop)).xi1 == doctest::Approx(4.0));
    }
}

TEST_CASE("violated condition is refused") {
    ProblemData d;
    d.x.resize(10, 1);
    d.x << 100, 1, 1, 1, 1, 1, 1, 1, 1, 1;
    d.y.resize(10);
    d.y << 50, 1, 2, 0, 1, 2, 1, 0, 1, 2;
    const RegressionProblem prob = make_problem(std::move(d));
    const FitResult f = fit(prob, WeightVector::ones(10));
    const std::vector<Eigen::Index> drop{0};
    const ErrorCertificate cert = certify_theta(prob, f, WeightVector::dropping(10, drop));
    CHECK(!cert.valid);
    CHECK(cert.reason == "condition violated");
}

TEST_CASE("certified bounds dominate the refit errors") {
    std::mt19937_64 rng(42);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const RegressionProblem prob = oracle::random_ols(rng, 200, 3);
        const FitResult f = fit(prob, WeightVector::ones(200));
        const InfluenceVector inf = influence_scores(f, prob, QuantityOfInterest::parameter(1));
        const AmisResult sel = amis(inf, 0.01);
        const ErrorCertificate cert = certify_qoi(prob, f, sel.w_star, QuantityOfInterest::parameter(1));
        if (!cert.valid) continue;
        ++checked;
        const FitResult refit = fit(prob, sel.w_star);
        const Eigen::MatrixXd d = dtheta_dw(f, prob);
        VectorXd lin = f.theta;
        for (Eigen::Index i : sel.dropped_indices) lin -= d.row(i).transpose();
        CHECK((refit.theta - lin).norm() <= cert.bound_lin);
        CHECK((refit.theta - f.theta).norm() <= cert.bound_diff);
        REQUIRE(cert.qoi_bound);
        CHECK(std::abs(refit.theta(1) - lin(1)) <= cert.qoi_bound->bound_lin);
    }
    CHECK(checked > 50);
}

TEST_CASE("nonlinear quantities need smoothness constants") {
    const RegressionProblem prob = oracle::toy_problem();
    const FitResult f = fit(prob, WeightVector::ones(2));
    const std::vector<Eigen::Index> drop{0};
    const WeightVector w = WeightVector::dropping(2, drop);
    const QuantityOfInterest sig = make_qoi(QoiKind::SignificanceChange, f, prob, 0);
    const ErrorCertificate refused = certify_qoi(prob, f, w, sig);
    CHECK(refused.valid);
    CHECK(!refused.qoi_bound);
    CHECK(refused.qoi_reason == "insufficient smoothness data");

    const ErrorCertificate given = certify_qoi(prob, f, w, sig, LipschitzData{1.0, 0.5, 2.0, 0.1});
    REQUIRE(given.qoi_bound);
    const double a = 0.5, cd = given.bound_diff / a, cl = given.bound_lin / (a * a);
    CHECK(given.qoi_bound->bound_lin == doctest::Approx((1.0 * (cd + 1) * cd + 2.0 * cl + 0.5 * (cd + 1)) * a * a));
    CHECK(given.qoi_bound->bound_diff == doctest::Approx((2.0 * cd + 0.1) * a));
}
