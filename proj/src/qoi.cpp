#include "amip/qoi.hpp"
#include "amip/error.hpp"

#include <cmath>
#include <string>

namespace amip {

std::string_view to_string(QoiKind kind) {
    switch (kind) {
        case QoiKind::Parameter: return "parameter";
        case QoiKind::SignChange: return "sign-change";
        case QoiKind::SignificanceChange: return "significance-change";
        case QoiKind::SignAndSignificance: return "sign-and-significance";
        case QoiKind::Custom: return "custom";
    }
    return "unknown";
}

QoiKind parse_qoi_kind(std::string_view name) {
    if (name == "param" || name == "parameter") return QoiKind::Parameter;
    if (name == "sign" || name == "sign-change") return QoiKind::SignChange;
    if (name == "sig" || name == "significance-change") return QoiKind::SignificanceChange;
    if (name == "both" || name == "sign-and-significance") return QoiKind::SignAndSignificance;
    throw ConfigError("unknown quantity of interest '" + std::string(name) + "'");
}

QuantityOfInterest QuantityOfInterest::parameter(Eigen::Index p, double direction) {
    QuantityOfInterest q;
    q.kind = QoiKind::Parameter;
    q.target = p;
    q.direction = direction;
    return q;
}

QuantityOfInterest QuantityOfInterest::linear_combination(Eigen::VectorXd coefficients) {
    QuantityOfInterest q;
    q.kind = QoiKind::Custom;
    q.linear = std::move(coefficients);
    return q;
}

QuantityOfInterest QuantityOfInterest::from_callbacks(CustomQoi callbacks) {
    if (!callbacks.value) throw ConfigError("custom quantity of interest needs a value callback");
    QuantityOfInterest q;
    q.kind = QoiKind::Custom;
    q.custom = std::move(callbacks);
    return q;
}

bool QuantityOfInterest::depends_on_weights() const {
    if (kind == QoiKind::Custom) return custom && static_cast<bool>(custom->grad_w);
    return endpoint != 0;
}

bool QuantityOfInterest::is_linear() const {
    if (kind == QoiKind::Custom) return linear.has_value();
    return endpoint == 0;
}

namespace {

void check_target(const QuantityOfInterest& qoi, const RegressionProblem& problem) {
    if (qoi.kind == QoiKind::Custom) {
        if (!qoi.linear && !qoi.custom) throw ConfigError("custom quantity has neither coefficients nor callbacks");
        if (qoi.linear && qoi.linear->size() != problem.n_params())
            throw BoundsError("linear functional length does not match P");
        return;
    }
    if (qoi.target < 0 || qoi.target >= problem.n_params())
        throw BoundsError("target index " + std::to_string(qoi.target) + " out of range for P=" +
                          std::to_string(problem.n_params()));
}

double sign_or_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

QuantityOfInterest make_qoi(QoiKind kind, const FitResult& fit, const RegressionProblem& problem,
                            Eigen::Index target, const SandwichOptions& opts, double level) {
    if (kind == QoiKind::Custom) throw ConfigError("custom quantities are built from callbacks, not make_qoi");
    if (target < 0 || target >= problem.n_params())
        throw BoundsError("target index " + std::to_string(target) + " out of range for P=" +
                          std::to_string(problem.n_params()));
    if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("critical level must be finite and nonnegative");

    QuantityOfInterest q;
    q.kind = kind;
    q.target = target;
    q.level = level;
    q.se_options = opts;
    const double theta = fit.theta(target);
    if (kind == QoiKind::Parameter) {
        q.direction = 1.0;
        q.delta = 0.0;
        return q;
    }
    const double s = sign_or_plus(theta);
    q.endpoint = kind == QoiKind::SignChange ? 0 : kind == QoiKind::SignificanceChange ? -static_cast<int>(s)
                                                                                       : static_cast<int>(s);
    double se = 0.0;
    if (q.endpoint != 0) {
        se = sandwich_covariance(fit, problem, WeightVector::ones(problem.n_obs()), opts).standard_errors(target);
    }
    // The endpoint being pushed across zero; an already insignificant result
    // turns significance-change into moving the near endpoint back past zero.
    const double v = theta + q.endpoint * level * se;
    q.direction = -sign_or_plus(v);
    q.delta = std::abs(v);
    return q;
}

double qoi_value(const QuantityOfInterest& qoi, const FitResult& fit_at_w, const RegressionProblem& problem,
                 const WeightVector& w) {
    check_target(qoi, problem);
    const Eigen::VectorXd& theta = fit_at_w.theta;
    if (qoi.kind == QoiKind::Custom) {
        if (qoi.linear) return qoi.linear->dot(theta);
        return qoi.custom->value(theta, w);
    }
    double v = theta(qoi.target);
    if (qoi.endpoint != 0) {
        const double se = standard_error_at(fit_at_w, problem, theta, w, qoi.se_options, qoi.target);
        v += qoi.endpoint * qoi.level * se;
    }
    return qoi.direction * v;
}

Eigen::VectorXd qoi_theta_gradient(const QuantityOfInterest& qoi, const FitResult& fit,
                                   const RegressionProblem& problem, const WeightVector& w) {
    check_target(qoi, problem);
    const Eigen::Index p = problem.n_params();
    if (qoi.kind == QoiKind::Custom) {
        if (qoi.linear) return *qoi.linear;
        if (!qoi.custom->grad_theta) throw MissingGradientError("custom quantity has no theta-gradient callback");
        Eigen::VectorXd g = qoi.custom->grad_theta(fit.theta, w);
        if (g.size() != p) throw MissingGradientError("theta-gradient callback returned the wrong length");
        return g;
    }
    Eigen::VectorXd g = Eigen::VectorXd::Unit(p, qoi.target);
    if (qoi.endpoint != 0) {
        g += qoi.endpoint * qoi.level *
             standard_error_derivative(fit, problem, w, qoi.se_options, qoi.target).grad_theta;
    }
    return qoi.direction * g;
}

Eigen::VectorXd qoi_weight_gradient(const QuantityOfInterest& qoi, const FitResult& fit,
                                    const RegressionProblem& problem, const WeightVector& w) {
    check_target(qoi, problem);
    const Eigen::Index n = problem.n_obs();
    if (qoi.kind == QoiKind::Custom) {
        if (qoi.custom && qoi.custom->grad_w) {
            Eigen::VectorXd g = qoi.custom->grad_w(fit.theta, w);
            if (g.size() != n) throw MissingGradientError("weight-gradient callback returned the wrong length");
            return g;
        }
        return Eigen::VectorXd::Zero(n);
    }
    if (qoi.endpoint == 0) return Eigen::VectorXd::Zero(n);
    return qoi.direction * qoi.endpoint * qoi.level *
           standard_error_derivative(fit, problem, w, qoi.se_options, qoi.target).grad_w;
}

double evaluate_qoi(const QuantityOfInterest& qoi, const RegressionProblem& problem, const WeightVector& w) {
    return qoi_value(qoi, fit(problem, w), problem, w);
}

}  // namespace amip
