#include "amip/simlab.hpp"
#include "amip/error.hpp"
#include "amip/influence.hpp"
#include "amip/parallel.hpp"
#include "amip/rng.hpp"
#include "amip/sandwich.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace amip {

void validate(const SimConfig& cfg) {
    if (!(cfg.sigma_x > 0.0) || !std::isfinite(cfg.sigma_x)) throw ConfigError("sigma_x must be positive");
    if (!(cfg.sigma_eps >= 0.0) || !std::isfinite(cfg.sigma_eps))
        throw ConfigError("sigma_eps must be nonnegative");
    if (cfg.n < 10) throw ConfigError("simulation needs n >= 10");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!std::isfinite(cfg.beta)) throw ConfigError("beta must be finite");
}

RegressionProblem simulate_problem(const SimConfig& cfg) {
    validate(cfg);
    Xoshiro256 rng(cfg.seed);
    ProblemData d;
    d.x.resize(cfg.n, 1);
    d.y.resize(cfg.n);
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        const double x = cfg.sigma_x * rng.normal();
        const double eps = cfg.sigma_eps * rng.normal();
        d.x(i, 0) = x;
        d.y(i) = cfg.beta * x + eps;
    }
    d.regressor_names = {"x"};
    return make_problem(std::move(d));
}

namespace {

std::optional<double> apip_for(QoiKind kind, const FitResult& f, const RegressionProblem& problem, double level) {
    const QuantityOfInterest q = make_qoi(kind, f, problem, 0, {}, level);
    return apip(influence_scores(f, problem, q), q.delta).alpha_star;
}

}  // namespace

SingleSimResult run_single_sim(const SimConfig& cfg) {
    const RegressionProblem problem = simulate_problem(cfg);
    const WeightVector ones = WeightVector::ones(problem.n_obs());
    const FitResult f = fit(problem, ones);
    const CovarianceEstimate cov = sandwich_covariance(f, problem, ones);

    SingleSimResult out;
    out.config = cfg;
    out.theta_hat = f.theta(0);
    out.se = cov.standard_errors(0);

    const QuantityOfInterest sign = make_qoi(QoiKind::SignChange, f, problem, 0, {}, cfg.level);
    const InfluenceVector sign_inf = influence_scores(f, problem, sign);
    out.sigma_psi = noise_sigma(f, problem, sign, cov);
    out.amip = amis(sign_inf, cfg.alpha).amip;
    out.apip_sign = apip(sign_inf, sign.delta).alpha_star;
    out.apip_significance = apip_for(QoiKind::SignificanceChange, f, problem, cfg.level);
    out.apip_both = apip_for(QoiKind::SignAndSignificance, f, problem, cfg.level);

    const InfluenceVector up = influence_scores(f, problem, QuantityOfInterest::parameter(0, 1.0));
    const InfluenceVector down = influence_scores(f, problem, QuantityOfInterest::parameter(0, -1.0));
    for (double a : cfg.path_alphas) {
        PathPoint pt;
        pt.alpha = a;
        pt.m_removed = drop_count(a, problem.n_obs());
        pt.predicted_up = pt.refit_up = pt.predicted_down = pt.refit_down = out.theta_hat;
        if (pt.m_removed > 0) {
            const AmisResult su = amis(up, a);
            const AmisResult sd = amis(down, a);
            pt.predicted_up = out.theta_hat + su.amip;
            pt.predicted_down = out.theta_hat - sd.amip;
            try {
                pt.refit_up = fit(problem, su.w_star).theta(0);
                pt.refit_down = fit(problem, sd.w_star).theta(0);
            } catch (const DegenerateSubsetError&) {
                pt.refit_ok = false;
            }
        }
        out.path.push_back(pt);
    }
    return out;
}

GridSpec GridSpec::standard() {
    GridSpec g;
    for (int i = 1; i <= 10; ++i) {
        g.sigma_x.push_back(0.4 * i);
        g.sigma_eps.push_back(1.25 * i);
    }
    return g;
}

GridResult run_grid(const GridSpec& spec) {
    if (spec.sigma_x.empty() || spec.sigma_eps.empty()) throw ConfigError("grid axes must be nonempty");
    if (spec.replicates < 1) throw ConfigError("replicates must be at least 1");
    GridResult out;
    out.sigma_x = spec.sigma_x;
    out.sigma_eps = spec.sigma_eps;
    const std::size_t nx = spec.sigma_x.size();
    out.cells.resize(nx * spec.sigma_eps.size());

    parallel_for(out.cells.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            GridCell& cell = out.cells[c];
            cell.ix = c % nx;
            cell.ie = c / nx;
            cell.sigma_x = spec.sigma_x[cell.ix];
            cell.sigma_eps = spec.sigma_eps[cell.ie];
            const std::uint64_t cell_seed = derive_seed(spec.seed, cell.ix, cell.ie);

            double sums[3] = {0.0, 0.0, 0.0};
            int counts[3] = {0, 0, 0};
            for (int r = 0; r < spec.replicates; ++r) {
                SimConfig cfg;
                cfg.n = spec.n;
                cfg.sigma_x = cell.sigma_x;
                cfg.sigma_eps = cell.sigma_eps;
                cfg.beta = spec.beta;
                cfg.level = spec.level;
                cfg.seed = spec.replicates == 1 ? cell_seed : derive_seed(cell_seed, static_cast<std::uint64_t>(r));
                const RegressionProblem problem = simulate_problem(cfg);
                const WeightVector ones = WeightVector::ones(problem.n_obs());
                const FitResult f = fit(problem, ones);
                cell.theta_hat += f.theta(0) / spec.replicates;
                cell.se += sandwich_covariance(f, problem, ones).standard_errors(0) / spec.replicates;
                const std::optional<double> values[3] = {apip_for(QoiKind::SignChange, f, problem, spec.level),
                                                         apip_for(QoiKind::SignificanceChange, f, problem, spec.level),
                                                         apip_for(QoiKind::SignAndSignificance, f, problem, spec.level)};
                for (int k = 0; k < 3; ++k) {
                    if (values[k]) {
                        sums[k] += *values[k];
                        ++counts[k];
                    }
                }
            }
            std::optional<double>* targets[3] = {&cell.apip_sign, &cell.apip_significance, &cell.apip_both};
            for (int k = 0; k < 3; ++k) {
                if (counts[k] > 0) *targets[k] = sums[k] / counts[k];
            }
        }
    });
    return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<std::optional<double>>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw BoundsError("spearman needs two equal-length samples");
    std::vector<double> av(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) av[i] = a[i] ? *a[i] : std::numeric_limits<double>::infinity();
    const std::vector<double> ra = average_ranks(av);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::vector<std::string> default_gamma_distributions() {
    return {"Worst case", "Normal", "Exponential", "Flipped exp", "T(10)", "T(3)",
            "T(2)", "Cauchy", "Uniform", "Binary(0.01)", "Binary(0.1)", "Binary(0.5)"};
}

double gamma_from_draws(std::vector<double> draws, double alpha) {
    const auto n = static_cast<Eigen::Index>(draws.size());
    const Eigen::Index m = drop_count(alpha, n);
    if (m == 0) throw AlphaTooSmallError("alpha allows no removals for this sample size");
    const double nd = static_cast<double>(n);
    const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / nd;
    double ss = 0.0;
    for (double v : draws) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / nd);
    if (!(sd > 0.0)) throw DegenerateSubsetError("draws have zero variance");
    std::nth_element(draws.begin(), draws.begin() + (m - 1), draws.end(), std::greater<double>());
    double tail = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) tail += (draws[static_cast<std::size_t>(i)] - mean) / sd;
    return tail / nd;
}

namespace {

double student_t(Xoshiro256& rng, int df) {
    const double z = rng.normal();
    double chi2 = 0.0;
    for (int k = 0; k < df; ++k) {
        const double g = rng.normal();
        chi2 += g * g;
    }
    return z / std::sqrt(chi2 / df);
}

std::function<double(Xoshiro256&)> sampler(const std::string& name) {
    if (name == "Normal") return [](Xoshiro256& r) { return r.normal(); };
    if (name == "Exponential") return [](Xoshiro256& r) { return r.exponential(); };
    if (name == "Flipped exp") return [](Xoshiro256& r) { return -r.exponential(); };
    if (name == "T(10)") return [](Xoshiro256& r) { return student_t(r, 10); };
    if (name == "T(3)") return [](Xoshiro256& r) { return student_t(r, 3); };
    if (name == "T(2)") return [](Xoshiro256& r) { return student_t(r, 2); };
    if (name == "Cauchy") return [](Xoshiro256& r) { return r.normal() / r.normal(); };
    if (name == "Uniform") return [](Xoshiro256& r) { return r.uniform(); };
    for (double p : {0.01, 0.1, 0.5}) {
        std::ostringstream label;
        label << "Binary(" << p << ")";
        if (name == label.str()) return [p](Xoshiro256& r) { return r.uniform() < p ? 1.0 : 0.0; };
    }
    throw ConfigError("unknown distribution '" + name + "'");
}

}  // namespace

std::vector<GammaRow> gamma_table(const std::vector<std::string>& distributions, Eigen::Index n, double alpha,
                                  std::uint64_t seed) {
    if (n < 1) throw ConfigError("gamma table needs at least one draw");
    std::vector<std::function<double(Xoshiro256&)>> samplers(distributions.size());
    for (std::size_t i = 0; i < distributions.size(); ++i) {
        if (distributions[i] != "Worst case") samplers[i] = sampler(distributions[i]);
    }
    std::vector<GammaRow> rows(distributions.size());
    parallel_for(distributions.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            rows[i].name = distributions[i];
            if (!samplers[i]) {
                rows[i].analytic = true;
                rows[i].gamma = std::sqrt(alpha * (1.0 - alpha));
                continue;
            }
            Xoshiro256 rng(derive_seed(seed, i));
            std::vector<double> draws(static_cast<std::size_t>(n));
            for (double& v : draws) v = samplers[i](rng);
            rows[i].gamma = gamma_from_draws(std::move(draws), alpha);
        }
    });
    return rows;
}

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
    if (v) out << *v;
    else out << "NA";
}

}  // namespace

void write_grid_csv(std::ostream& out, const GridResult& grid) {
    out << std::setprecision(17);
    out << "sigma_x,sigma_eps,theta_hat,se,apip_sign,apip_significance,apip_both\n";
    for (const GridCell& c : grid.cells) {
        out << c.sigma_x << ',' << c.sigma_eps << ',' << c.theta_hat << ',' << c.se << ',';
        put(out, c.apip_sign);
        out << ',';
        put(out, c.apip_significance);
        out << ',';
        put(out, c.apip_both);
        out << '\n';
    }
}

void write_path_csv(std::ostream& out, const SingleSimResult& sim) {
    out << std::setprecision(17);
    out << "alpha,m_removed,predicted_up,refit_up,predicted_down,refit_down,refit_ok\n";
    for (const PathPoint& p : sim.path) {
        out << p.alpha << ',' << p.m_removed << ',' << p.predicted_up << ',' << p.refit_up << ','
            << p.predicted_down << ',' << p.refit_down << ',' << (p.refit_ok ? "true" : "false") << '\n';
    }
}

void write_gamma_csv(std::ostream& out, const std::vector<GammaRow>& rows) {
    out << std::setprecision(17);
    out << "distribution,gamma,analytic\n";
    for (const GammaRow& r : rows) out << '"' << r.name << "\"," << r.gamma << ',' << (r.analytic ? "true" : "false") << '\n';
}

}  // namespace amip
