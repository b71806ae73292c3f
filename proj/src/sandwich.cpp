#include "amip/sandwich.hpp"
#include "amip/error.hpp"
#include "amip/qoi.hpp"

#include <algorithm>
#include <cmath>

namespace amip {

namespace {

void check_options(const RegressionProblem& problem, const WeightVector& w, const SandwichOptions& opts) {
    if (w.size() != problem.n_obs()) throw BoundsError("weight vector length does not match N");
    if (opts.cluster_mode == ClusterMode::ByLabel) {
        if (!problem.clusters) throw ConfigError("clustered standard errors requested but no cluster column given");
        if (opts.se_compat == SeCompat::LmCompatible)
            throw ConfigError("lm-compatible standard errors cannot be combined with clustering");
    }
}

int group_of(const RegressionProblem& problem, const SandwichOptions& opts, Eigen::Index n) {
    return opts.cluster_mode == ClusterMode::ByLabel ? (*problem.clusters)[static_cast<std::size_t>(n)]
                                                     : static_cast<int>(n);
}

int group_count(const RegressionProblem& problem, const SandwichOptions& opts) {
    if (opts.cluster_mode != ClusterMode::ByLabel) return static_cast<int>(problem.n_obs());
    const auto& c = *problem.clusters;
    return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

// omega_n = w_n^{k/2} multiplies each score in the meat.
double score_weight(const SandwichOptions& opts, double w) {
    return opts.score_weighting == ScoreWeighting::W ? std::sqrt(w) : w;
}

double score_weight_derivative(const SandwichOptions& opts, double w) {
    if (opts.score_weighting == ScoreWeighting::WSquared) return 1.0;
    // d sqrt(w)/dw is unbounded at w = 0; a dropped row contributes nothing.
    return w > 0.0 ? 0.5 / std::sqrt(w) : 0.0;
}

// Bread A = sum w b z x^T (the negated estimating-equation Jacobian).
Eigen::MatrixXd bread(const FitResult& fit) { return -fit.jacobian; }

struct Meat {
    Eigen::MatrixXd matrix;  // S, or sigma^2 Q for lm-compatible
    double sigma2 = 1.0;     // lm-compatible only
    double df = 0.0;
};

Meat meat(const RegressionProblem& problem, const Eigen::VectorXd& eps, const WeightVector& w,
          const SandwichOptions& opts) {
    const Eigen::MatrixXd& z = problem.instruments();
    const Eigen::Index n = problem.n_obs();
    const Eigen::Index p = problem.n_params();
    Meat out;
    if (opts.se_compat == SeCompat::LmCompatible) {
        Eigen::VectorXd eff(n);
        Eigen::Index kept = 0;
        double ssr = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            eff(i) = w[i] * problem.base_weight(i);
            if (w[i] > 0.0) ++kept;
            ssr += eff(i) * eps(i) * eps(i);
        }
        out.df = static_cast<double>(kept - p);
        if (!(out.df > 0.0)) throw DegenerateSubsetError("no residual degrees of freedom remain");
        out.sigma2 = ssr / out.df;
        out.matrix = out.sigma2 * (z.transpose() * eff.asDiagonal() * z);
        return out;
    }
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(group_count(problem, opts), p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = score_weight(opts, w[i]) * problem.base_weight(i) * eps(i);
        if (c != 0.0) scores.row(group_of(problem, opts, i)) += c * z.row(i);
    }
    out.matrix = scores.transpose() * scores;
    return out;
}

// N / denominator, so that SE_p^2 = scale * V_pp with V = A^{-1} S A^{-T}.
double se_scale(const RegressionProblem& problem, const WeightVector& w, const SandwichOptions& opts) {
    if (opts.normalization == Normalization::DivideByN) return 1.0;
    const double total = w.sum();
    if (!(total > 0.0)) throw DegenerateSubsetError("all removal weights are zero");
    return static_cast<double>(problem.n_obs()) / total;
}

}  // namespace

CovarianceEstimate sandwich_covariance(const FitResult& fit, const RegressionProblem& problem,
                                       const WeightVector& w, const SandwichOptions& opts) {
    check_options(problem, w, opts);
    if (fit.kind == EstimatorKind::General)
        throw ConfigError("sandwich covariance needs an OLS or IV fit");
    const Eigen::Index p = problem.n_params();
    const double n = static_cast<double>(problem.n_obs());

    Meat m = meat(problem, fit.residuals, w, opts);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> a_qr(bread(fit));
    Eigen::MatrixXd left = a_qr.solve(m.matrix);                       // A^{-1} S
    Eigen::MatrixXd v = a_qr.solve(Eigen::MatrixXd(left.transpose()));  // A^{-1} (A^{-1} S)^T
    Eigen::MatrixXd sigma = n * v;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();

    CovarianceEstimate out;
    out.sigma_theta = sigma;
    out.min_eigenvalue = p > 0 ? Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sigma, Eigen::EigenvaluesOnly)
                                     .eigenvalues()
                                     .minCoeff()
                               : 0.0;
    const double scale = se_scale(problem, w, opts);
    out.standard_errors.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) out.standard_errors(j) = std::sqrt(std::max(0.0, scale * v(j, j)));
    return out;
}

double standard_error_at(const FitResult& fit, const RegressionProblem& problem, const Eigen::VectorXd& theta,
                         const WeightVector& w, const SandwichOptions& opts, Eigen::Index p) {
    check_options(problem, w, opts);
    if (p < 0 || p >= problem.n_params()) throw BoundsError("coefficient index out of range");
    const Eigen::VectorXd eps = problem.y - problem.x * theta;
    Meat m = meat(problem, eps, w, opts);
    Eigen::VectorXd e = Eigen::VectorXd::Unit(problem.n_params(), p);
    Eigen::VectorXd u = bread(fit).transpose().colPivHouseholderQr().solve(e);
    return std::sqrt(std::max(0.0, se_scale(problem, w, opts) * u.dot(m.matrix * u)));
}

StandardErrorDerivative standard_error_derivative(const FitResult& fit, const RegressionProblem& problem,
                                                  const WeightVector& w, const SandwichOptions& opts,
                                                  Eigen::Index p) {
    check_options(problem, w, opts);
    if (fit.kind == EstimatorKind::General)
        throw ConfigError("standard error derivatives need an OLS or IV fit");
    const Eigen::Index np = problem.n_params();
    const Eigen::Index n = problem.n_obs();
    if (p < 0 || p >= np) throw BoundsError("coefficient index out of range");

    const Eigen::MatrixXd& z = problem.instruments();
    const Eigen::MatrixXd& x = problem.x;
    const Eigen::VectorXd& eps = fit.residuals;
    const Eigen::MatrixXd a = bread(fit);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> a_qr(a);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> at_qr(a.transpose());

    const Eigen::VectorXd u = at_qr.solve(Eigen::VectorXd::Unit(np, p));
    const Eigen::VectorXd a_n = z * u;
    Meat m = meat(problem, eps, w, opts);
    const double v_pp = u.dot(m.matrix * u);
    // A-dependence of u^T M u: -2 b_m a_m x_m^T A^{-1} M u.
    const Eigen::VectorXd back = a_qr.solve(Eigen::VectorXd(m.matrix * u));

    Eigen::VectorXd dv_theta = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd dv_w(n);
    for (Eigen::Index i = 0; i < n; ++i) dv_w(i) = -2.0 * problem.base_weight(i) * a_n(i) * x.row(i).dot(back);

    if (opts.se_compat == SeCompat::LmCompatible) {
        const double q = v_pp / m.sigma2;
        Eigen::VectorXd dsigma_theta = Eigen::VectorXd::Zero(np);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double b = problem.base_weight(i);
            dsigma_theta -= (2.0 * w[i] * b * eps(i) / m.df) * x.row(i).transpose();
            dv_w(i) += q * b * eps(i) * eps(i) / m.df + m.sigma2 * b * a_n(i) * a_n(i);
        }
        dv_theta = q * dsigma_theta;
    } else {
        const int groups = group_count(problem, opts);
        Eigen::VectorXd t = Eigen::VectorXd::Zero(groups);
        for (Eigen::Index i = 0; i < n; ++i)
            t(group_of(problem, opts, i)) += score_weight(opts, w[i]) * problem.base_weight(i) * eps(i) * a_n(i);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double b = problem.base_weight(i);
            const double tg = t(group_of(problem, opts, i));
            dv_theta -= (2.0 * tg * score_weight(opts, w[i]) * b * a_n(i)) * x.row(i).transpose();
            dv_w(i) += 2.0 * tg * score_weight_derivative(opts, w[i]) * b * eps(i) * a_n(i);
        }
    }

    const double scale = se_scale(problem, w, opts);
    StandardErrorDerivative out;
    out.se = std::sqrt(std::max(0.0, scale * v_pp));
    out.grad_theta = Eigen::VectorXd::Zero(np);
    out.grad_w = Eigen::VectorXd::Zero(n);
    if (!(out.se > 0.0)) return out;
    out.grad_theta = scale * dv_theta / (2.0 * out.se);
    out.grad_w = scale * dv_w;
    if (opts.normalization == Normalization::DivideBySumW) {
        const double total = w.sum();
        out.grad_w.array() -= v_pp * static_cast<double>(n) / (total * total);
    }
    out.grad_w /= 2.0 * out.se;
    return out;
}

double noise_sigma(const Eigen::VectorXd& theta_gradient, const CovarianceEstimate& cov) {
    if (theta_gradient.size() != cov.sigma_theta.rows()) throw BoundsError("gradient length does not match P");
    return std::sqrt(std::max(0.0, theta_gradient.dot(cov.sigma_theta * theta_gradient)));
}

double noise_sigma(const FitResult& fit, const RegressionProblem& problem, const QuantityOfInterest& qoi,
                   const CovarianceEstimate& cov) {
    return noise_sigma(qoi_theta_gradient(qoi, fit, problem, WeightVector::ones(problem.n_obs())), cov);
}

}  // namespace amip
