#include "amip/zestim.hpp"
#include "amip/error.hpp"

#include <cmath>
#include <limits>

namespace amip {

WeightVector WeightVector::dropping(Eigen::Index n, std::span<const Eigen::Index> dropped) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    for (auto i : dropped) {
        if (i < 0 || i >= n) throw BoundsError("drop index " + std::to_string(i) + " out of range");
        v(i) = 0.0;
    }
    return WeightVector(std::move(v));
}

bool WeightVector::is_binary() const {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (values_(i) != 0.0 && values_(i) != 1.0) return false;
    }
    return true;
}

std::vector<Eigen::Index> WeightVector::dropped() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (values_(i) == 0.0) out.push_back(i);
    }
    return out;
}

namespace {

Eigen::VectorXd effective_weights(const RegressionProblem& problem, const WeightVector& w) {
    if (w.size() != problem.n_obs())
        throw BoundsError("weight vector has length " + std::to_string(w.size()) + ", expected " +
                          std::to_string(problem.n_obs()));
    Eigen::VectorXd eff = w.values();
    if (problem.base_weights) eff = eff.cwiseProduct(*problem.base_weights);
    for (Eigen::Index i = 0; i < eff.size(); ++i) {
        if (!std::isfinite(eff(i)) || eff(i) < 0.0) throw BoundsError("weights must be finite and nonnegative");
    }
    if (!(eff.sum() > 0.0)) throw DegenerateSubsetError("all effective weights are zero");
    return eff;
}

double singular_value_ratio(const Eigen::MatrixXd& square) {
    Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(square).singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0)) return 0.0;
    return sv(sv.size() - 1) / sv(0);
}

}  // namespace

FitResult fit_ols(const RegressionProblem& problem, const WeightVector& w) {
    const Eigen::VectorXd eff = effective_weights(problem, w);
    const Eigen::Index p = problem.n_params();
    const Eigen::VectorXd root = eff.cwiseSqrt();

    Eigen::MatrixXd design = root.asDiagonal() * problem.x;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    if (singular_value_ratio(r) <= kRankTolerance)
        throw DegenerateSubsetError("weighted regressor matrix is rank deficient for this weighting");

    FitResult out;
    out.kind = EstimatorKind::Ols;
    out.theta = qr.solve(root.cwiseProduct(problem.y));
    out.residuals = problem.y - problem.x * out.theta;
    out.jacobian = -(problem.x.transpose() * eff.asDiagonal() * problem.x);
    out.jacobian_qr.compute(out.jacobian);
    out.effective_weights = eff;
    out.converged = true;
    out.iterations = 0;
    out.equation_residual =
        (problem.x.transpose() * eff.cwiseProduct(out.residuals)).cwiseAbs().maxCoeff();
    return out;
}

FitResult fit_iv(const RegressionProblem& problem, const WeightVector& w) {
    if (!problem.z) throw ConfigError("IV fit requested but the problem has no instruments");
    const Eigen::VectorXd eff = effective_weights(problem, w);
    const Eigen::MatrixXd& z = *problem.z;

    Eigen::MatrixXd cross = z.transpose() * eff.asDiagonal() * problem.x;
    if (singular_value_ratio(cross) <= kRankTolerance)
        throw WeakInstrumentError("weighted instrument cross-product sum w z x^T is singular");

    FitResult out;
    out.kind = EstimatorKind::Iv;
    out.jacobian = -cross;
    out.jacobian_qr.compute(out.jacobian);
    out.theta = -out.jacobian_qr.solve(z.transpose() * eff.cwiseProduct(problem.y));
    out.residuals = problem.y - problem.x * out.theta;
    out.effective_weights = eff;
    out.converged = true;
    out.iterations = 0;
    out.equation_residual = (z.transpose() * eff.cwiseProduct(out.residuals)).cwiseAbs().maxCoeff();
    return out;
}

FitResult fit(const RegressionProblem& problem, const WeightVector& w) {
    return problem.is_iv() ? fit_iv(problem, w) : fit_ols(problem, w);
}

namespace {

Eigen::VectorXd weighted_sum(const ZEstimatorSpec& spec, const Eigen::VectorXd& theta, Eigen::Index n_obs,
                             const Eigen::VectorXd& weights) {
    Eigen::VectorXd total = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index n = 0; n < n_obs; ++n) {
        if (weights(n) == 0.0) continue;
        Eigen::VectorXd g = spec.g_eval(theta, n);
        if (g.size() != theta.size())
            throw ConfigError("estimating function returned length " + std::to_string(g.size()) +
                              ", expected " + std::to_string(theta.size()));
        total += weights(n) * g;
    }
    return total;
}

}  // namespace

Eigen::MatrixXd weighted_jacobian(const ZEstimatorSpec& spec, const Eigen::VectorXd& theta,
                                  Eigen::Index n_obs, const Eigen::VectorXd& weights) {
    const Eigen::Index p = theta.size();
    if (spec.g_jacobian) {
        Eigen::MatrixXd total = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index n = 0; n < n_obs; ++n) {
            if (weights(n) == 0.0) continue;
            total += weights(n) * spec.g_jacobian(theta, n);
        }
        return total;
    }
    if (!spec.allow_numeric_jacobian)
        throw MissingGradientError("no Jacobian callback and numeric differencing disabled");
    const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double h = base_step * std::max(1.0, std::abs(theta(j)));
        Eigen::VectorXd up = theta, down = theta;
        up(j) += h;
        down(j) -= h;
        jac.col(j) = (weighted_sum(spec, up, n_obs, weights) - weighted_sum(spec, down, n_obs, weights)) /
                     (up(j) - down(j));
    }
    return jac;
}

FitResult solve_zestimator(const ZEstimatorSpec& spec, Eigen::Index n_obs, const WeightVector& w) {
    if (!spec.g_eval) throw ConfigError("estimating function callback is required");
    if (w.size() != n_obs) throw BoundsError("weight vector length does not match the number of observations");
    if (spec.theta0.size() == 0 || !spec.theta0.allFinite()) throw ConfigError("theta0 must be finite and nonempty");
    if (!spec.g_jacobian && !spec.allow_numeric_jacobian)
        throw MissingGradientError("no Jacobian callback and numeric differencing disabled");

    const Eigen::VectorXd& weights = w.values();
    Eigen::VectorXd theta = spec.theta0;
    Eigen::VectorXd f = weighted_sum(spec, theta, n_obs, weights);
    const double target = spec.tolerance * std::max(1.0, f.cwiseAbs().maxCoeff());

    FitResult out;
    out.kind = EstimatorKind::General;
    out.effective_weights = weights;
    int iter = 0;
    double f_norm = f.cwiseAbs().maxCoeff();
    while (f_norm > target) {
        if (iter == spec.max_iterations) {
            throw SolverError("Newton iteration did not converge in " + std::to_string(iter) +
                                  " iterations (residual " + std::to_string(f_norm) + ")",
                              theta, f_norm);
        }
        Eigen::MatrixXd jac = weighted_jacobian(spec, theta, n_obs, weights);
        if (!jac.allFinite() || singular_value_ratio(jac) <= kRankTolerance)
            throw SingularJacobianError("estimating-equation Jacobian is singular at iteration " +
                                        std::to_string(iter));
        Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-f);

        // Halve the step until the residual decreases; fall back to the full
        // Newton step if no reduction is found (roundoff near the root).
        double t = 1.0;
        Eigen::VectorXd candidate = theta + step;
        Eigen::VectorXd f_candidate = weighted_sum(spec, candidate, n_obs, weights);
        while (!(f_candidate.allFinite() && f_candidate.cwiseAbs().maxCoeff() < f_norm) && t > 1e-6) {
            t *= 0.5;
            candidate = theta + t * step;
            f_candidate = weighted_sum(spec, candidate, n_obs, weights);
        }
        if (!(f_candidate.allFinite() && f_candidate.cwiseAbs().maxCoeff() < f_norm)) {
            candidate = theta + step;
            f_candidate = weighted_sum(spec, candidate, n_obs, weights);
        }
        if (!f_candidate.allFinite()) throw SolverError("estimating function became non-finite", theta, f_norm);
        theta = std::move(candidate);
        f = std::move(f_candidate);
        f_norm = f.cwiseAbs().maxCoeff();
        ++iter;
    }

    out.theta = theta;
    out.jacobian = weighted_jacobian(spec, theta, n_obs, weights);
    if (singular_value_ratio(out.jacobian) <= kRankTolerance)
        throw SingularJacobianError("estimating-equation Jacobian is singular at the solution");
    out.jacobian_qr.compute(out.jacobian);
    out.converged = true;
    out.iterations = iter;
    out.equation_residual = f_norm;
    return out;
}

FitResult solve_zestimator(const ZEstimatorSpec& spec, const Dataset& data, const WeightVector& w) {
    return solve_zestimator(spec, static_cast<Eigen::Index>(data.n_rows()), w);
}

ZEstimatorSpec ols_estimating_equation(const RegressionProblem& problem) {
    ZEstimatorSpec spec;
    spec.g_eval = [&problem](const Eigen::VectorXd& theta, Eigen::Index n) -> Eigen::VectorXd {
        const Eigen::VectorXd xn = problem.x.row(n).transpose();
        return problem.base_weight(n) * xn * (problem.y(n) - xn.dot(theta));
    };
    spec.g_jacobian = [&problem](const Eigen::VectorXd&, Eigen::Index n) -> Eigen::MatrixXd {
        const Eigen::VectorXd xn = problem.x.row(n).transpose();
        return -problem.base_weight(n) * xn * xn.transpose();
    };
    spec.theta0 = Eigen::VectorXd::Zero(problem.n_params());
    return spec;
}

}  // namespace amip
