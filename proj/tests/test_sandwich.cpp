#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "amip/error.hpp"
#include "amip/influence.hpp"
#include "amip/sandwich.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace amip;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("two-point regression covariance") {
    const RegressionProblem prob = oracle::toy_problem();
    const WeightVector ones = WeightVector::ones(2);
    const FitResult f = fit(prob, ones);
    const CovarianceEstimate cov = sandwich_covariance(f, prob, ones);
    CHECK(cov.sigma_theta(0, 0) == doctest::Approx(0.1024).epsilon(1e-13));
    CHECK(cov.standard_errors(0) == doctest::Approx(std::sqrt(0.0512)).epsilon(1e-13));
    CHECK(noise_sigma(f, prob, QuantityOfInterest::parameter(0), cov) == doctest::Approx(0.32).epsilon(1e-13));
}

TEST_CASE("exact fit has zero covariance") {
    ProblemData d;
    d.x.resize(5, 2);
    d.x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 5;
    d.y = d.x * Eigen::Vector2d(-1.0, 0.25);
    const RegressionProblem prob = make_problem(std::move(d));
    const FitResult f = fit(prob, WeightVector::ones(5));
    CHECK(sandwich_covariance(f, prob, WeightVector::ones(5)).sigma_theta.cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("matches an explicit-inverse sandwich for OLS and IV, weighted") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const RegressionProblem prob = rep % 2 ? oracle::random_iv(rng, 40, 3) : oracle::random_ols(rng, 40, 3);
        VectorXd w(40);
        for (int i = 0; i < 40; ++i) w(i) = oracle::unif(rng, 0.2, 1.5);
        const FitResult f = fit(prob, WeightVector(w));
        const CovarianceEstimate cov = sandwich_covariance(f, prob, WeightVector(w));
        const MatrixXd expected = oracle::explicit_sandwich(prob, w);
        CHECK((cov.sigma_theta - expected).cwiseAbs().maxCoeff() <= 1e-9 * expected.cwiseAbs().maxCoeff());
        CHECK((cov.sigma_theta - cov.sigma_theta.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(cov.min_eigenvalue >= -1e-8 * cov.sigma_theta.norm());
    }
}

TEST_CASE("singleton clusters reproduce the unclustered estimate") {
    std::mt19937_64 rng(22);
    const RegressionProblem base = oracle::random_ols(rng, 30, 3);
    ProblemData d;
    d.x = base.x;
    d.y = base.y;
    d.clusters = std::vector<int>(30);
    for (int i = 0; i < 30; ++i) (*d.clusters)[static_cast<std::size_t>(i)] = 29 - i;
    const RegressionProblem prob = make_problem(std::move(d));
    const WeightVector ones = WeightVector::ones(30);
    const FitResult f = fit(prob, ones);
    SandwichOptions clustered;
    clustered.cluster_mode = ClusterMode::ByLabel;
    const MatrixXd a = sandwich_covariance(f, prob, ones).sigma_theta;
    const MatrixXd b = sandwich_covariance(f, prob, ones, clustered).sigma_theta;
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-14 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("clustered scores are summed within groups") {
    std::mt19937_64 rng(23);
    const RegressionProblem base = oracle::random_ols(rng, 12, 2);
    ProblemData d;
    d.x = base.x;
    d.y = base.y;
    d.clusters = std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3};
    const RegressionProblem prob = make_problem(std::move(d));
    const WeightVector ones = WeightVector::ones(12);
    const FitResult f = fit(prob, ones);
    SandwichOptions clustered;
    clustered.cluster_mode = ClusterMode::ByLabel;

    MatrixXd a = prob.x.transpose() * prob.x;
    MatrixXd s = MatrixXd::Zero(2, 2);
    for (int g = 0; g < 4; ++g) {
        VectorXd sg = VectorXd::Zero(2);
        for (int i = 3 * g; i < 3 * g + 3; ++i) sg += f.residuals(i) * prob.x.row(i).transpose();
        s += sg * sg.transpose();
    }
    const MatrixXd expected = 12.0 * a.inverse() * s * a.inverse();
    const MatrixXd got = sandwich_covariance(f, prob, ones, clustered).sigma_theta;
    CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-12 * expected.cwiseAbs().maxCoeff());
}

TEST_CASE("lm-compatible errors are the classical ones") {
    std::mt19937_64 rng(24);
    const RegressionProblem prob = oracle::random_ols(rng, 25, 3);
    const WeightVector ones = WeightVector::ones(25);
    const FitResult f = fit(prob, ones);
    const double s2 = f.residuals.squaredNorm() / (25 - 3);
    const MatrixXd classical = s2 * (prob.x.transpose() * prob.x).inverse();
    const VectorXd se = sandwich_covariance(f, prob, ones, SandwichOptions::lm_compatible()).standard_errors;
    for (int j = 0; j < 3; ++j) CHECK(se(j) == doctest::Approx(std::sqrt(classical(j, j))).epsilon(1e-12));
}

TEST_CASE("option validation") {
    const RegressionProblem prob = oracle::toy_problem();
    const WeightVector ones = WeightVector::ones(2);
    const FitResult f = fit(prob, ones);
    SandwichOptions clustered;
    clustered.cluster_mode = ClusterMode::ByLabel;
    CHECK_THROWS_AS(sandwich_covariance(f, prob, ones, clustered), ConfigError);
}

TEST_CASE("noise equals root-N times the score norm") {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 30; ++rep) {
        const RegressionProblem prob = rep % 2 ? oracle::random_iv(rng, 35, 4) : oracle::random_ols(rng, 35, 4);
        const WeightVector ones = WeightVector::ones(35);
        const FitResult f = fit(prob, ones);
        const CovarianceEstimate cov = sandwich_covariance(f, prob, ones);
        const QuantityOfInterest q = make_qoi(QoiKind::SignChange, f, prob, 3);
        const double sigma = noise_sigma(f, prob, q, cov);
        const VectorXd psi = influence_scores(f, prob, q).psi;
        CHECK(sigma * sigma == doctest::Approx(35.0 * psi.squaredNorm()).epsilon(1e-8));
    }
}

TEST_CASE("standard error derivatives match differences in theta") {
    std::mt19937_64 rng(26);
    const RegressionProblem prob = oracle::random_ols(rng, 20, 3);
    const WeightVector ones = WeightVector::ones(20);
    const FitResult f = fit(prob, ones);
    for (const SandwichOptions& o : {SandwichOptions{}, SandwichOptions::lm_compatible()}) {
        const StandardErrorDerivative d = standard_error_derivative(f, prob, ones, o, 1);
        CHECK(d.se == doctest::Approx(sandwich_covariance(f, prob, ones, o).standard_errors(1)));
        for (int j = 0; j < 3; ++j) {
            VectorXd up = f.theta, down = f.theta;
            const double h = 1e-6;
            up(j) += h;
            down(j) -= h;
            const double fd =
                (standard_error_at(f, prob, up, ones, o, 1) - standard_error_at(f, prob, down, ones, o, 1)) / (2 * h);
            CHECK(d.grad_theta(j) == doctest::Approx(fd).epsilon(1e-6).scale(d.se));
        }
    }
}
