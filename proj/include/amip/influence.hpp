#pragma once

#include "amip/dataset.hpp"
#include "amip/qoi.hpp"
#include "amip/zestim.hpp"

#include <Eigen/Dense>

#include <vector>

namespace amip {

// Row n is d theta / d w_n = -H^{-1} G(theta, d_n) at the fit's weights. For
// OLS this is (sum b x x^T)^{-1} b_n x_n eps_n.
Eigen::MatrixXd dtheta_dw(const FitResult& fit, const RegressionProblem& problem);
Eigen::MatrixXd dtheta_dw(const FitResult& fit, const ZEstimatorSpec& spec, Eigen::Index n_obs);

struct InfluenceVector {
    Eigen::VectorXd psi;
    // Ascending psi, ties by index.
    std::vector<Eigen::Index> sorted_order;

    static InfluenceVector from_scores(Eigen::VectorXd psi);
    Eigen::Index size() const noexcept { return psi.size(); }
};

// psi_n = grad_theta(phi)^T d theta / d w_n + d phi / d w_n at w = 1.
InfluenceVector influence_scores(const FitResult& fit, const RegressionProblem& problem,
                                 const QuantityOfInterest& qoi);

// Chain rule from precomputed parameter derivatives (general Z-estimators).
// `grad_w` may be null.
InfluenceVector influence_scores(const Eigen::MatrixXd& dtheta, const Eigen::VectorXd& grad_theta,
                                 const Eigen::VectorXd* grad_w = nullptr);

}  // namespace amip
