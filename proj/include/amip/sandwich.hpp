#pragma once

#include "amip/dataset.hpp"
#include "amip/zestim.hpp"

#include <Eigen/Dense>

namespace amip {

enum class ClusterMode { None, ByLabel };
// Denominator of the standard error: SE_p = sqrt(Sigma_pp / N) or
// sqrt(Sigma_pp / sum_n w_n).
enum class Normalization { DivideByN, DivideBySumW };
// Power of the removal weight on each score in the meat matrix.
enum class ScoreWeighting { W, WSquared };
// Native: heteroskedasticity-robust sandwich. LmCompatible: the classical
// homoskedastic covariance reported by R's lm().
enum class SeCompat { Native, LmCompatible };

struct SandwichOptions {
    ClusterMode cluster_mode = ClusterMode::None;
    Normalization normalization = Normalization::DivideByN;
    ScoreWeighting score_weighting = ScoreWeighting::W;
    SeCompat se_compat = SeCompat::Native;

    static SandwichOptions lm_compatible() {
        SandwichOptions o;
        o.se_compat = SeCompat::LmCompatible;
        return o;
    }

    bool operator==(const SandwichOptions&) const = default;
};

struct CovarianceEstimate {
    // Sigma_theta = N H^{-1} S H^{-T}, symmetrized.
    Eigen::MatrixXd sigma_theta;
    Eigen::VectorXd standard_errors;
    // Smallest eigenvalue of sigma_theta; negative values flag numerical trouble
    // and are reported rather than clipped.
    double min_eigenvalue = 0.0;
};

// Sandwich covariance at the fit's parameter for removal weights `w`. `fit`
// must be the OLS/IV fit of `problem` at `w`.
CovarianceEstimate sandwich_covariance(const FitResult& fit, const RegressionProblem& problem,
                                       const WeightVector& w, const SandwichOptions& opts = {});

// Standard error of coordinate p as a smooth function SE_p(theta, w), with its
// partial derivatives at (fit.theta, w). Gradients are zero when SE_p = 0.
struct StandardErrorDerivative {
    double se = 0.0;
    Eigen::VectorXd grad_theta;
    Eigen::VectorXd grad_w;
};

StandardErrorDerivative standard_error_derivative(const FitResult& fit, const RegressionProblem& problem,
                                                  const WeightVector& w, const SandwichOptions& opts,
                                                  Eigen::Index p);

// SE_p(theta, w) evaluated at an arbitrary theta (residuals recomputed from
// theta, bread from the fit's Jacobian).
double standard_error_at(const FitResult& fit, const RegressionProblem& problem, const Eigen::VectorXd& theta,
                         const WeightVector& w, const SandwichOptions& opts, Eigen::Index p);

// Delta-method noise sqrt(g^T Sigma_theta g).
double noise_sigma(const Eigen::VectorXd& theta_gradient, const CovarianceEstimate& cov);

struct QuantityOfInterest;

// Noise for a quantity of interest: uses its theta-gradient at the fit.
double noise_sigma(const FitResult& fit, const RegressionProblem& problem, const QuantityOfInterest& qoi,
                   const CovarianceEstimate& cov);

}  // namespace amip
