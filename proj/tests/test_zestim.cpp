#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "amip/error.hpp"
#include "amip/zestim.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace amip;
using Eigen::VectorXd;

TEST_CASE("weighted least squares on two points") {
    const RegressionProblem p = oracle::toy_problem();
    const FitResult f = fit_ols(p, WeightVector::ones(2));
    CHECK(f.theta(0) == doctest::Approx(1.8));
    CHECK(f.residuals(0) == doctest::Approx(-0.8));
    CHECK(f.residuals(1) == doctest::Approx(0.4));
    CHECK(fit_ols(p, WeightVector(Eigen::Vector2d(0, 1))).theta(0) == doctest::Approx(2.0));
}

TEST_CASE("perfect fit") {
    ProblemData d;
    d.x.resize(4, 1);
    d.x << 1, 2, -1, 4;
    d.y = 3.0 * d.x.col(0);
    const RegressionProblem p = make_problem(std::move(d));
    const FitResult f = fit_ols(p, WeightVector(Eigen::Vector4d(0.3, 1, 0, 2)));
    CHECK(f.theta(0) == doctest::Approx(3.0));
    CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("instrumental variables on two points") {
    ProblemData d;
    d.x.resize(2, 1);
    d.x << 1, 2;
    d.y.resize(2);
    d.y << 1, 4;
    Eigen::MatrixXd z(2, 1);
    z << 1, 1;
    d.z = z;
    const RegressionProblem p = make_problem(std::move(d));
    CHECK(fit_iv(p, WeightVector::ones(2)).theta(0) == doctest::Approx(5.0 / 3.0));
    CHECK(fit_iv(p, WeightVector(Eigen::Vector2d(1, 0))).theta(0) == doctest::Approx(1.0));
}

TEST_CASE("instruments equal to regressors reproduce least squares") {
    std::mt19937_64 rng(61);
    const RegressionProblem p = oracle::random_ols(rng, 30, 4);
    ProblemData d;
    d.x = p.x;
    d.y = p.y;
    d.z = p.x;
    const RegressionProblem iv = make_problem(std::move(d));
    CHECK((fit(iv, WeightVector::ones(30)).theta - fit(p, WeightVector::ones(30)).theta).norm() < 1e-12);
}

TEST_CASE("degenerate drop sets are reported") {
    ProblemData d;
    d.x.resize(4, 2);
    d.x << 1, 0, 1, 0, 1, 1, 1, 2;
    d.y = Eigen::Vector4d(1, 2, 3, 4);
    const RegressionProblem p = make_problem(std::move(d));
    const std::vector<Eigen::Index> drop{2, 3};
    CHECK_THROWS_AS(fit_ols(p, WeightVector::dropping(4, drop)), DegenerateSubsetError);
    CHECK_THROWS_AS(fit_ols(p, WeightVector(Eigen::Vector4d::Zero())), DegenerateSubsetError);
}

TEST_CASE("sample mean through the general solver") {
    const std::vector<double> xs{1, 2, 3};
    ZEstimatorSpec spec;
    spec.g_eval = [&xs](const VectorXd& theta, Eigen::Index n) {
        return VectorXd::Constant(1, theta(0) - xs[static_cast<std::size_t>(n)]);
    };
    spec.theta0 = VectorXd::Zero(1);
    const FitResult f = solve_zestimator(spec, 3, WeightVector::ones(3));
    CHECK(f.converged);
    CHECK(f.theta(0) == doctest::Approx(2.0));
    CHECK(solve_zestimator(spec, 3, WeightVector(Eigen::Vector3d(0, 1, 1))).theta(0) == doctest::Approx(2.5));
}

TEST_CASE("general solver reproduces the closed form") {
    std::mt19937_64 rng(62);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index n = 10 + rep % 41;
        const Eigen::Index p = 1 + rep % 5;
        const RegressionProblem prob = oracle::random_ols(rng, n, p);
        ZEstimatorSpec spec = ols_estimating_equation(prob);
        if (rep % 2) spec.g_jacobian = nullptr;  // numeric differencing path
        const FitResult general = solve_zestimator(spec, n, WeightVector::ones(n));
        const FitResult closed = fit_ols(prob, WeightVector::ones(n));
        CHECK((general.theta - closed.theta).norm() <= 1e-8 * std::max(1.0, closed.theta.norm()));
        CHECK(general.equation_residual <= 1e-10 * std::max(1.0, (prob.x.transpose() * prob.y).cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("nonlinear estimating equation") {
    // Poisson-style mean: G = y - exp(theta); root at log(mean y).
    const std::vector<double> ys{1, 3, 4, 8};
    ZEstimatorSpec spec;
    spec.g_eval = [&ys](const VectorXd& theta, Eigen::Index n) {
        return VectorXd::Constant(1, ys[static_cast<std::size_t>(n)] - std::exp(theta(0)));
    };
    spec.theta0 = VectorXd::Zero(1);
    const FitResult f = solve_zestimator(spec, 4, WeightVector::ones(4));
    CHECK(f.theta(0) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("solver failures") {
    ZEstimatorSpec flat;
    flat.g_eval = [](const VectorXd&, Eigen::Index) { return VectorXd::Constant(1, 1.0); };
    flat.theta0 = VectorXd::Zero(1);
    CHECK_THROWS_AS(solve_zestimator(flat, 3, WeightVector::ones(3)), SingularJacobianError);

    ZEstimatorSpec no_root;
    no_root.g_eval = [](const VectorXd& t, Eigen::Index) { return VectorXd::Constant(1, t(0) * t(0) + 1.0); };
    no_root.theta0 = VectorXd::Constant(1, 1.0);
    no_root.max_iterations = 20;
    CHECK_THROWS_AS(solve_zestimator(no_root, 2, WeightVector::ones(2)), Error);

    ZEstimatorSpec nojac = no_root;
    nojac.allow_numeric_jacobian = false;
    CHECK_THROWS_AS(solve_zestimator(nojac, 2, WeightVector::ones(2)), MissingGradientError);
}

TEST_CASE("scaling all weights leaves the estimate unchanged") {
    std::mt19937_64 rng(63);
    for (int rep = 0; rep < 20; ++rep) {
        const RegressionProblem p = rep % 2 ? oracle::random_iv(rng, 25, 3) : oracle::random_ols(rng, 25, 3);
        VectorXd w(25);
        for (int i = 0; i < 25; ++i) w(i) = oracle::unif(rng, 0.1, 2.0);
        const VectorXd a = fit(p, WeightVector(w)).theta;
        const VectorXd b = fit(p, WeightVector(7.5 * w)).theta;
        CHECK((a - b).norm() <= 1e-10 * std::max(1.0, a.norm()));
    }
}
