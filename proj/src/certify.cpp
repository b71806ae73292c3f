#include "amip/certify.hpp"
#include "amip/error.hpp"
#include "amip/influence.hpp"

#include <cmath>

namespace amip {

double inverse_operator_norm(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, int* iterations) {
    const Eigen::Index p = qr.cols();
    Eigen::VectorXd v(p);
    for (Eigen::Index i = 0; i < p; ++i) v(i) = 1.0 / static_cast<double>(i + 1);
    v.normalize();
    double lambda = 0.0;
    int it = 0;
    for (; it < 1000; ++it) {
        Eigen::VectorXd inner = qr.solve(v);
        Eigen::VectorXd next = qr.transpose().solve(inner);
        const double next_lambda = next.norm();
        if (!(next_lambda > 0.0)) break;
        v = next / next_lambda;
        const bool done = std::abs(next_lambda - lambda) <= 1e-10 * next_lambda;
        lambda = next_lambda;
        if (done) {
            ++it;
            break;
        }
    }
    if (iterations) *iterations = it;
    return std::sqrt(lambda);
}

CertificateConstants compute_constants(const RegressionProblem& problem, const FitResult& fit,
                                       const WeightVector& w) {
    if (fit.kind == EstimatorKind::General) throw ConfigError("certificates cover OLS and IV fits only");
    if (w.size() != problem.n_obs()) throw BoundsError("weight vector length does not match N");
    if (!w.is_binary()) throw BoundsError("certificates need a 0/1 removal vector");
    const Eigen::Index n = problem.n_obs();
    const Eigen::Index p = problem.n_params();
    const Eigen::MatrixXd& z = problem.instruments();
    const std::vector<Eigen::Index> dropped = w.dropped();

    CertificateConstants c;
    c.alpha = static_cast<double>(dropped.size()) / static_cast<double>(n);
    // fit.jacobian = -sum b z x^T, so its inverse has the same norm as
    // (sum b z x^T)^{-1}; scale by N for the mean.
    c.c_op = static_cast<double>(n) * inverse_operator_norm(fit.jacobian_qr, &c.power_iterations);
    c.c_op_scaled = 1.5 * c.c_op;
    if (dropped.empty()) return c;

    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (Eigen::Index idx : dropped) {
        const double b = problem.base_weight(idx);
        cross += b * z.row(idx).transpose() * problem.x.row(idx);
        score += b * fit.residuals(idx) * z.row(idx).transpose();
    }
    const double m = static_cast<double>(dropped.size());
    c.xi1 = Eigen::JacobiSVD<Eigen::MatrixXd>(cross / m).singularValues()(0);
    c.xi2 = (score / m).norm();

    const Eigen::MatrixXd dtheta = dtheta_dw(fit, problem);
    Eigen::VectorXd change = Eigen::VectorXd::Zero(p);
    for (Eigen::Index idx : dropped) change -= dtheta.row(idx).transpose();
    c.linear_change = change.norm();

    c.condition_value = c.alpha * c.c_op * c.xi1;
    const double k = 2.0 * c.alpha * c.alpha * c.c_op_scaled * c.c_op_scaled;
    c.c_ball = (c.linear_change + k * c.xi1 * c.xi2) / (1.0 - k * c.xi1 * c.xi1);
    return c;
}

ErrorCertificate certify_theta(const RegressionProblem& problem, const FitResult& fit, const WeightVector& w) {
    ErrorCertificate cert;
    cert.constants = compute_constants(problem, fit, w);
    const CertificateConstants& c = cert.constants;
    if (!(c.condition_value <= kCertificateThreshold)) {
        cert.valid = false;
        cert.reason = "condition violated";
        return cert;
    }
    cert.valid = true;
    const double k = 2.0 * c.alpha * c.alpha * c.c_op_scaled * c.c_op_scaled;
    cert.bound_lin = k * c.xi1 * (c.xi2 + c.c_ball * c.xi1);
    cert.bound_diff = c.alpha * c.c_op * (c.xi2 + c.c_ball * c.xi1);
    return cert;
}

namespace {

// Lemma-style bounds given parameter bounds and smoothness constants.
void qoi_bounds(const LipschitzData& l, double alpha, double bound_lin, double bound_diff, double& out_lin,
                double& out_diff) {
    if (alpha == 0.0) {
        out_lin = 0.0;
        out_diff = 0.0;
        return;
    }
    const double c_diff = bound_diff / alpha;
    const double c_lin = bound_lin / (alpha * alpha);
    out_lin = (l.l_theta * (c_diff + 1.0) * c_diff + l.c_theta * c_lin + l.l_omega * (c_diff + 1.0)) * alpha * alpha;
    out_diff = (l.c_theta * c_diff + l.c_omega) * alpha;
}

}  // namespace

ErrorCertificate certify_qoi(const RegressionProblem& problem, const FitResult& fit, const WeightVector& w,
                             const QuantityOfInterest& qoi, const std::optional<LipschitzData>& lipschitz) {
    ErrorCertificate cert = certify_theta(problem, fit, w);
    if (!cert.valid) {
        cert.qoi_reason = "parameter certificate invalid";
        return cert;
    }
    const WeightVector ones = WeightVector::ones(problem.n_obs());
    LipschitzData l;
    if (lipschitz) {
        l = *lipschitz;
    } else if (qoi.is_linear() && !qoi.depends_on_weights()) {
        l.c_theta = qoi_theta_gradient(qoi, fit, problem, ones).norm();
    } else {
        cert.qoi_reason = "insufficient smoothness data";
        return cert;
    }

    const CertificateConstants& c = cert.constants;
    QoiBound qb;
    qb.constants = l;
    qoi_bounds(l, c.alpha, cert.bound_lin, cert.bound_diff, qb.bound_lin, qb.bound_diff);

    const InfluenceVector inf = influence_scores(fit, problem, qoi);
    double change = 0.0;
    for (Eigen::Index idx : w.dropped()) change -= inf.psi(idx);
    qb.qoi_linear_change = std::abs(change);
    const double k = 2.0 * c.alpha * c.alpha * c.c_op_scaled * c.c_op_scaled;
    if (c.alpha > 0.0) {
        qb.c_ball_qoi = (qb.qoi_linear_change + k * c.xi1 * c.xi2) / (1.0 - k * c.xi1 * c.xi1);
        const double lin = k * c.xi1 * (c.xi2 + qb.c_ball_qoi * c.xi1);
        const double diff = c.alpha * c.c_op * (c.xi2 + qb.c_ball_qoi * c.xi1);
        qoi_bounds(l, c.alpha, lin, diff, qb.bound_lin_qoi, qb.bound_diff_qoi);
    }
    cert.qoi_bound = qb;
    return cert;
}

}  // namespace amip
