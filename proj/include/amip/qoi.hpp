#pragma once

#include "amip/dataset.hpp"
#include "amip/sandwich.hpp"
#include "amip/zestim.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string_view>

namespace amip {

enum class QoiKind { Parameter, SignChange, SignificanceChange, SignAndSignificance, Custom };

std::string_view to_string(QoiKind kind);
// Accepts "param", "sign", "sig", "both" and the long names.
QoiKind parse_qoi_kind(std::string_view name);

// User-supplied phi(theta, w). `grad_w` may be left empty when phi has no
// explicit weight dependence.
struct CustomQoi {
    std::function<double(const Eigen::VectorXd& theta, const WeightVector& w)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, const WeightVector& w)> grad_theta;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& theta, const WeightVector& w)> grad_w;
};

// A scalar phi(theta, w) that the drop analysis tries to increase. The
// built-in reversal kinds all have the form
//
//     phi = direction * (theta_p + endpoint * level * SE_p(theta, w))
//
// with endpoint in {-1, 0, +1}; delta is the increase in phi that moves that
// interval endpoint to zero.
struct QuantityOfInterest {
    QoiKind kind = QoiKind::Parameter;
    Eigen::Index target = 0;
    double level = 1.96;
    // +1/-1 for reversal kinds; any nonzero multiplier for Parameter.
    double direction = 1.0;
    int endpoint = 0;
    SandwichOptions se_options;
    double delta = 0.0;
    // Custom kinds: either a fixed linear functional c^T theta or callbacks.
    std::optional<Eigen::VectorXd> linear;
    std::optional<CustomQoi> custom;

    static QuantityOfInterest parameter(Eigen::Index p, double direction = 1.0);
    static QuantityOfInterest linear_combination(Eigen::VectorXd coefficients);
    static QuantityOfInterest from_callbacks(CustomQoi callbacks);

    bool depends_on_weights() const;
    // Linear in theta with no explicit weight dependence.
    bool is_linear() const;
};

// Builds a reversal target for coordinate `target` from the full-data fit.
// Throws BoundsError for a bad index and ConfigError for Custom.
QuantityOfInterest make_qoi(QoiKind kind, const FitResult& fit, const RegressionProblem& problem,
                            Eigen::Index target, const SandwichOptions& opts = {}, double level = 1.96);

// phi(theta(w), w) given the fit at w.
double qoi_value(const QuantityOfInterest& qoi, const FitResult& fit_at_w, const RegressionProblem& problem,
                 const WeightVector& w);

// d phi / d theta at (fit.theta, w).
Eigen::VectorXd qoi_theta_gradient(const QuantityOfInterest& qoi, const FitResult& fit,
                                   const RegressionProblem& problem, const WeightVector& w);

// Explicit partial d phi / d w at (fit.theta, w); zero for weight-free phi.
Eigen::VectorXd qoi_weight_gradient(const QuantityOfInterest& qoi, const FitResult& fit,
                                    const RegressionProblem& problem, const WeightVector& w);

// Refits at w and evaluates phi there.
double evaluate_qoi(const QuantityOfInterest& qoi, const RegressionProblem& problem, const WeightVector& w);

}  // namespace amip
