#pragma once

#include "amip/dataset.hpp"
#include "amip/error.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace amip {

// Removal weights: 1 keeps an observation, 0 drops it. Fractional values are
// allowed for differentiation. Effective weights are these times the
// problem's base weights.
class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(Eigen::VectorXd values) : values_(std::move(values)) {}

    static WeightVector ones(Eigen::Index n) { return WeightVector(Eigen::VectorXd::Ones(n)); }
    // All ones except zeros at `dropped`. Throws BoundsError on a bad index.
    static WeightVector dropping(Eigen::Index n, std::span<const Eigen::Index> dropped);

    const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::Index size() const noexcept { return values_.size(); }
    double operator[](Eigen::Index n) const { return values_(n); }

    bool is_binary() const;
    std::vector<Eigen::Index> dropped() const;
    double sum() const { return values_.sum(); }

private:
    Eigen::VectorXd values_;
};

enum class EstimatorKind { Ols, Iv, General };

struct FitResult {
    EstimatorKind kind = EstimatorKind::Ols;
    Eigen::VectorXd theta;
    // y - X theta for OLS/IV; empty for general Z-estimators.
    Eigen::VectorXd residuals;
    // H(w) = sum_n w_n d G(theta, d_n) / d theta^T at the solution, and its
    // factorization for repeated solves.
    Eigen::MatrixXd jacobian;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> jacobian_qr;
    Eigen::VectorXd effective_weights;
    bool converged = false;
    int iterations = 0;
    // sup-norm of sum_n w_n G(theta, d_n) at the returned theta.
    double equation_residual = 0.0;
};

// theta(w) = (sum w x x^T)^{-1} sum w x y, solved by a pivoted QR of the
// row-scaled design. Throws DegenerateSubsetError when the weighted design is
// rank deficient.
FitResult fit_ols(const RegressionProblem& problem, const WeightVector& w);

// Just-identified IV: solves sum w z (y - x^T theta) = 0. Throws
// WeakInstrumentError when sum w z x^T is singular.
FitResult fit_iv(const RegressionProblem& problem, const WeightVector& w);

// OLS or IV depending on whether the problem carries instruments.
FitResult fit(const RegressionProblem& problem, const WeightVector& w);

// Per-observation estimating function G(theta, d_n) and optional Jacobian.
// The solver may call these from several threads at once.
using EstimatingFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, Eigen::Index n)>;
using EstimatingJacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd& theta, Eigen::Index n)>;

struct ZEstimatorSpec {
    EstimatingFunction g_eval;
    EstimatingJacobian g_jacobian;  // empty: central differences
    Eigen::VectorXd theta0;
    bool allow_numeric_jacobian = true;
    double tolerance = 1e-10;
    int max_iterations = 100;
};

class SolverError : public Error {
public:
    SolverError(const std::string& msg, Eigen::VectorXd last_theta, double residual_norm)
        : Error(ErrorKind::SolverFailure, msg),
          last_theta_(std::move(last_theta)),
          residual_norm_(residual_norm) {}

    const Eigen::VectorXd& last_theta() const noexcept { return last_theta_; }
    double residual_norm() const noexcept { return residual_norm_; }

private:
    Eigen::VectorXd last_theta_;
    double residual_norm_;
};

// Damped Newton on F(theta) = sum_n w_n G(theta, d_n). Stops when
// ||F||_inf <= tolerance * max(1, ||F(theta0)||_inf).
FitResult solve_zestimator(const ZEstimatorSpec& spec, Eigen::Index n_obs, const WeightVector& w);
FitResult solve_zestimator(const ZEstimatorSpec& spec, const Dataset& data, const WeightVector& w);

// sum_n w_n dG(theta, d_n)/dtheta^T, analytic when the spec provides it and
// by central differences with step cbrt(eps) * max(1, |theta_j|) otherwise.
Eigen::MatrixXd weighted_jacobian(const ZEstimatorSpec& spec, const Eigen::VectorXd& theta,
                                  Eigen::Index n_obs, const Eigen::VectorXd& weights);

// The OLS estimating function G(theta, (x_n, y_n)) = x_n (y_n - x_n^T theta)
// as a ZEstimatorSpec, for cross-checks against the closed form.
ZEstimatorSpec ols_estimating_equation(const RegressionProblem& problem);

}  // namespace amip
