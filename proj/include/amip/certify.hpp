#pragma once

#include "amip/dataset.hpp"
#include "amip/qoi.hpp"
#include "amip/zestim.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace amip {

inline constexpr double kCertificateThreshold = 1.0 / 3.0;

struct CertificateConstants {
    double alpha = 0.0;
    // Spectral norm of (N^{-1} sum b z x^T)^{-1} and 1.5 times it.
    double c_op = 0.0;
    double c_op_scaled = 0.0;
    // Spectral norm of the dropped-set mean of b z x^T, and 2-norm of the
    // dropped-set mean of b z eps.
    double xi1 = 0.0;
    double xi2 = 0.0;
    // ||theta_lin(w) - theta(1)||_2, the first-order parameter change.
    double linear_change = 0.0;
    double c_ball = 0.0;
    double condition_value = 0.0;
    int power_iterations = 0;
};

struct LipschitzData {
    double l_theta = 0.0;
    double l_omega = 0.0;
    double c_theta = 0.0;
    double c_omega = 0.0;
};

struct QoiBound {
    LipschitzData constants;
    // |phi(w) - phi_lin(w)| and |phi(w) - phi(1)|.
    double bound_lin = 0.0;
    double bound_diff = 0.0;
    // The same bounds with the ball radius built from |phi_lin(w) - phi(1)|
    // instead of the parameter-level change.
    double qoi_linear_change = 0.0;
    double c_ball_qoi = 0.0;
    double bound_lin_qoi = 0.0;
    double bound_diff_qoi = 0.0;
};

struct ErrorCertificate {
    CertificateConstants constants;
    // ||theta(w) - theta_lin(w)||_2 and ||theta(w) - theta(1)||_2 bounds.
    double bound_lin = 0.0;
    double bound_diff = 0.0;
    bool valid = false;
    std::string reason;
    std::optional<QoiBound> qoi_bound;
    std::string qoi_reason;
};

// Constants from the full-data fit only; `w` must be a 0/1 removal vector.
CertificateConstants compute_constants(const RegressionProblem& problem, const FitResult& fit,
                                       const WeightVector& w);

// Spectral norm of the inverse of `matrix` by power iteration on the given
// factorization, relative tolerance 1e-10, at most 1000 steps.
double inverse_operator_norm(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, int* iterations = nullptr);

ErrorCertificate certify_theta(const RegressionProblem& problem, const FitResult& fit, const WeightVector& w);

// Parameter certificate plus the QOI bound. Without `lipschitz` only QOIs
// linear in theta with no explicit weight dependence are certified; others
// get a refusal in qoi_reason.
ErrorCertificate certify_qoi(const RegressionProblem& problem, const FitResult& fit, const WeightVector& w,
                             const QuantityOfInterest& qoi,
                             const std::optional<LipschitzData>& lipschitz = std::nullopt);

}  // namespace amip
