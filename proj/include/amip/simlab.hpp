#pragma once

#include "amip/dataset.hpp"
#include "amip/metrics.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace amip {

// y_n = beta x_n + eps_n with x ~ N(0, sigma_x^2), eps ~ N(0, sigma_eps^2),
// fitted without an intercept.
struct SimConfig {
    Eigen::Index n = 10'000;
    double sigma_x = 1.0;
    double sigma_eps = 1.0;
    double beta = -1.0;
    std::uint64_t seed = 0;
    double alpha = 0.01;
    double level = 1.96;
    // Proportions at which the removal path is evaluated by refitting.
    std::vector<double> path_alphas = {0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2};
};

// Throws ConfigError for sigma_x <= 0, sigma_eps < 0 or n < 10.
void validate(const SimConfig& cfg);

RegressionProblem simulate_problem(const SimConfig& cfg);

// Adversarial removal in both directions of theta at one proportion. All four
// values are estimates of theta (linear prediction or refit), not changes.
struct PathPoint {
    double alpha = 0.0;
    Eigen::Index m_removed = 0;
    double predicted_up = 0.0;
    double refit_up = 0.0;
    double predicted_down = 0.0;
    double refit_down = 0.0;
    bool refit_ok = true;
};

struct SingleSimResult {
    SimConfig config;
    double theta_hat = 0.0;
    double se = 0.0;
    double sigma_psi = 0.0;
    // Predicted change toward a sign change at config.alpha.
    double amip = 0.0;
    std::optional<double> apip_sign;
    std::optional<double> apip_significance;
    std::optional<double> apip_both;
    std::vector<PathPoint> path;
};

SingleSimResult run_single_sim(const SimConfig& cfg);

struct GridSpec {
    std::vector<double> sigma_x;
    std::vector<double> sigma_eps;
    Eigen::Index n = 10'000;
    double beta = -1.0;
    std::uint64_t seed = 0;
    int replicates = 1;
    double level = 1.96;

    // 10 x 10: sigma_x in 0.4..4, sigma_eps in 1.25..12.5, evenly spaced.
    static GridSpec standard();
};

struct GridCell {
    std::size_t ix = 0;
    std::size_t ie = 0;
    double sigma_x = 0.0;
    double sigma_eps = 0.0;
    // Averages over replicates (APIPs over the non-NA replicates).
    double theta_hat = 0.0;
    double se = 0.0;
    std::optional<double> apip_sign;
    std::optional<double> apip_significance;
    std::optional<double> apip_both;
};

struct GridResult {
    std::vector<double> sigma_x;
    std::vector<double> sigma_eps;
    // Row-major with sigma_eps as the row: cells[ie * sigma_x.size() + ix].
    std::vector<GridCell> cells;

    const GridCell& at(std::size_t ix, std::size_t ie) const { return cells[ie * sigma_x.size() + ix]; }
};

// Cells run in parallel; each cell's seed depends only on (seed, ix, ie), so
// results do not depend on the thread count.
GridResult run_grid(const GridSpec& spec);

// Spearman rank correlation with average ranks for ties; NA values rank
// together above every finite value.
double spearman(const std::vector<std::optional<double>>& a, const std::vector<double>& b);

struct GammaRow {
    std::string name;
    double gamma = 0.0;
    bool analytic = false;
};

std::vector<std::string> default_gamma_distributions();

// Gamma for n draws per named distribution. Draws are standardized to sample
// mean 0 and variance 1 and the upper floor(alpha n) tail is averaged over n.
// "Worst case" is the analytic sqrt(alpha (1 - alpha)). Throws ConfigError on
// an unknown name.
std::vector<GammaRow> gamma_table(const std::vector<std::string>& distributions, Eigen::Index n = 1'000'000,
                                  double alpha = 0.01, std::uint64_t seed = 0);

double gamma_from_draws(std::vector<double> draws, double alpha);

void write_grid_csv(std::ostream& out, const GridResult& grid);
void write_path_csv(std::ostream& out, const SingleSimResult& sim);
void write_gamma_csv(std::ostream& out, const std::vector<GammaRow>& rows);

}  // namespace amip
