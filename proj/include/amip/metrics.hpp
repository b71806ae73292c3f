#pragma once

#include "amip/dataset.hpp"
#include "amip/influence.hpp"
#include "amip/qoi.hpp"
#include "amip/zestim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace amip {

// floor(alpha * N), guarded against representation error such as 0.07 * 100.
Eigen::Index drop_count(double alpha, Eigen::Index n);

struct AmisResult {
    double alpha = 0.0;
    // Most negative scores first; only strictly negative scores are dropped.
    std::vector<Eigen::Index> dropped_indices;
    WeightVector w_star;
    // Predicted change sum over dropped of -psi_n.
    double amip = 0.0;
};

// Throws AlphaTooSmallError when floor(alpha N) = 0 and BoundsError when alpha
// is outside (0, 1].
AmisResult amis(const InfluenceVector& inf, double alpha);

struct ApipResult {
    double delta = 0.0;
    std::optional<Eigen::Index> m_removed;
    std::optional<double> alpha_star;
    // Running sums of -psi over the strictly negative scores in drop order.
    std::vector<double> cumulative_path;
};

// Smallest m whose cumulative predicted change strictly exceeds delta.
ApipResult apip(const InfluenceVector& inf, double delta);

struct Decomposition {
    double sigma_psi = 0.0;
    // Empty when sigma_psi = 0 (perfect fit).
    std::optional<double> gamma_alpha;
    // sqrt(a (1 - a)) for the dropped proportion a.
    double gamma_bound = 0.0;
    // N psi_n / sigma_psi; empty when sigma_psi = 0.
    Eigen::VectorXd gamma_n;
};

Decomposition decompose(const InfluenceVector& inf, const AmisResult& selection, double sigma_psi);

struct RefitCheck {
    double phi_before = 0.0;
    double phi_after = 0.0;
    double exact_change = 0.0;
    double predicted_change = 0.0;
    double delta = 0.0;
    bool achieved = false;
    Eigen::VectorXd theta_after;
    // Standard error of the target coordinate at the refit (built-in kinds).
    std::optional<double> se_after;
};

// One extra fit at w*; phi (including any standard error it uses) is
// recomputed at the refit. Degenerate refits propagate their error.
RefitCheck refit_lower_bound(const RegressionProblem& problem, const FitResult& fit,
                             const QuantityOfInterest& qoi, const AmisResult& selection);

struct BruteForceResult {
    std::vector<Eigen::Index> exact_mis;
    double exact_mip = 0.0;
    std::uint64_t fits = 0;
    // Drop sets whose refit was not identified.
    std::uint64_t skipped = 0;
};

inline constexpr std::uint64_t kMaxBruteForceFits = 2'000'000;

// Enumerates every drop set of size <= max_drop and refits. Ties go to the
// lexicographically smallest set. Throws EnumerationTooLargeError above
// kMaxBruteForceFits subsets.
BruteForceResult brute_force_mip(const RegressionProblem& problem, const QuantityOfInterest& qoi,
                                 Eigen::Index max_drop);

}  // namespace amip
