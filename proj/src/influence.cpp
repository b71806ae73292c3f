#include "amip/influence.hpp"
#include "amip/error.hpp"

#include <algorithm>
#include <numeric>

namespace amip {

namespace {

void require_invertible(const FitResult& fit) {
    if (fit.jacobian.size() == 0 || !fit.jacobian_qr.isInvertible())
        throw SingularJacobianError("estimating-equation Jacobian is singular");
}

}  // namespace

Eigen::MatrixXd dtheta_dw(const FitResult& fit, const RegressionProblem& problem) {
    require_invertible(fit);
    const Eigen::MatrixXd& z = problem.instruments();
    Eigen::VectorXd coef(problem.n_obs());
    for (Eigen::Index n = 0; n < problem.n_obs(); ++n) coef(n) = problem.base_weight(n) * fit.residuals(n);
    // Columns of G^T are b_n z_n eps_n.
    Eigen::MatrixXd g = z.transpose() * coef.asDiagonal();
    Eigen::MatrixXd d = -fit.jacobian_qr.solve(g);
    return d.transpose();
}

Eigen::MatrixXd dtheta_dw(const FitResult& fit, const ZEstimatorSpec& spec, Eigen::Index n_obs) {
    require_invertible(fit);
    if (!spec.g_eval) throw ConfigError("estimating function callback is required");
    const Eigen::Index p = fit.theta.size();
    Eigen::MatrixXd g(p, n_obs);
    for (Eigen::Index n = 0; n < n_obs; ++n) g.col(n) = spec.g_eval(fit.theta, n);
    Eigen::MatrixXd d = -fit.jacobian_qr.solve(g);
    return d.transpose();
}

InfluenceVector InfluenceVector::from_scores(Eigen::VectorXd psi) {
    InfluenceVector out;
    out.psi = std::move(psi);
    out.sorted_order.resize(static_cast<std::size_t>(out.psi.size()));
    std::iota(out.sorted_order.begin(), out.sorted_order.end(), Eigen::Index{0});
    const Eigen::VectorXd& v = out.psi;
    std::stable_sort(out.sorted_order.begin(), out.sorted_order.end(),
                     [&v](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    return out;
}

InfluenceVector influence_scores(const FitResult& fit, const RegressionProblem& problem,
                                 const QuantityOfInterest& qoi) {
    const WeightVector ones = WeightVector::ones(problem.n_obs());
    const Eigen::VectorXd grad_theta = qoi_theta_gradient(qoi, fit, problem, ones);
    Eigen::VectorXd psi = dtheta_dw(fit, problem) * grad_theta;
    if (qoi.depends_on_weights()) psi += qoi_weight_gradient(qoi, fit, problem, ones);
    return InfluenceVector::from_scores(std::move(psi));
}

InfluenceVector influence_scores(const Eigen::MatrixXd& dtheta, const Eigen::VectorXd& grad_theta,
                                 const Eigen::VectorXd* grad_w) {
    if (dtheta.cols() != grad_theta.size()) throw BoundsError("gradient length does not match P");
    Eigen::VectorXd psi = dtheta * grad_theta;
    if (grad_w) {
        if (grad_w->size() != psi.size()) throw BoundsError("weight gradient length does not match N");
        psi += *grad_w;
    }
    return InfluenceVector::from_scores(std::move(psi));
}

}  // namespace amip
