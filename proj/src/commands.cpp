#include "amip/commands.hpp"

#include "amip/error.hpp"
#include "amip/influence.hpp"
#include "amip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace amip {

namespace {

std::vector<std::size_t> rows_of(const RegressionProblem& problem, const std::vector<Eigen::Index>& idx) {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (Eigen::Index i : idx) out.push_back(problem.row_ids[static_cast<std::size_t>(i)]);
    return out;
}

// Greedy selection of the m most negative scores, as amis would return at
// proportion m / N.
AmisResult prefix_selection(const InfluenceVector& inf, Eigen::Index m) {
    AmisResult sel;
    sel.alpha = static_cast<double>(m) / static_cast<double>(inf.size());
    Eigen::VectorXd w = Eigen::VectorXd::Ones(inf.size());
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = inf.sorted_order[static_cast<std::size_t>(k)];
        if (!(inf.psi(i) < 0.0)) break;
        sel.dropped_indices.push_back(i);
        sel.amip -= inf.psi(i);
        w(i) = 0.0;
    }
    sel.w_star = WeightVector(std::move(w));
    return sel;
}

RefitBlock refit_block(const LoadedModel& model, const FitResult& fit, const QuantityOfInterest& q,
                       const AmisResult& sel) {
    RefitBlock b;
    b.n_removed = static_cast<std::int64_t>(sel.dropped_indices.size());
    b.dropped_rows = rows_of(model.problem, sel.dropped_indices);
    b.predicted_change = sel.amip;
    try {
        const RefitCheck rc = refit_lower_bound(model.problem, fit, q, sel);
        b.refit_estimate = rc.theta_after(model.target);
        b.refit_se = rc.se_after;
        b.phi_after = rc.phi_after;
        b.exact_change = rc.exact_change;
        b.achieved = rc.achieved;
    } catch (const DegenerateSubsetError& e) {
        b.error = e.what();
    } catch (const WeakInstrumentError& e) {
        b.error = e.what();
    }
    return b;
}

CertificateBlock certificate_block(const LoadedModel& model, const FitResult& fit, const QuantityOfInterest& q,
                                   const AmisResult& sel, const std::optional<LipschitzData>& lipschitz) {
    const ErrorCertificate cert = certify_qoi(model.problem, fit, sel.w_star, q, lipschitz);
    CertificateBlock c;
    c.valid = cert.valid;
    c.reason = cert.reason;
    c.alpha = cert.constants.alpha;
    c.c_op = cert.constants.c_op;
    c.xi1 = cert.constants.xi1;
    c.xi2 = cert.constants.xi2;
    c.condition_value = cert.constants.condition_value;
    c.c_ball = cert.constants.c_ball;
    c.bound_lin = cert.bound_lin;
    c.bound_diff = cert.bound_diff;
    if (cert.qoi_bound) {
        c.qoi_bound_lin = cert.qoi_bound->bound_lin;
        c.qoi_bound_diff = cert.qoi_bound->bound_diff;
    }
    c.qoi_reason = cert.qoi_reason;
    try {
        const FitResult refit = amip::fit(model.problem, sel.w_star);
        const Eigen::MatrixXd d = dtheta_dw(fit, model.problem);
        const Eigen::VectorXd change = sel.w_star.values() - Eigen::VectorXd::Ones(model.problem.n_obs());
        const Eigen::VectorXd lin = fit.theta + d.transpose() * change;
        c.actual_lin = (refit.theta - lin).norm();
        c.actual_diff = (refit.theta - fit.theta).norm();
    } catch (const DegenerateSubsetError&) {
    } catch (const WeakInstrumentError&) {
    }
    return c;
}

QoiKind first_kind(const AnalyzeOptions& opts) {
    if (opts.kinds.empty()) throw ConfigError("no quantity of interest requested");
    return opts.kinds.front();
}

}  // namespace

SandwichOptions sandwich_options(const ModelOptions& opts) {
    SandwichOptions s = opts.se == SeCompat::LmCompatible ? SandwichOptions::lm_compatible() : SandwichOptions{};
    if (opts.cluster_col) {
        if (opts.se == SeCompat::LmCompatible)
            throw ConfigError("clustered standard errors have no lm-compatible form");
        s.cluster_mode = ClusterMode::ByLabel;
    }
    return s;
}

LoadedModel load_model(const ModelOptions& opts) {
    if (opts.outcome.empty()) throw ConfigError("an outcome column is required");
    if (opts.target.empty()) throw ConfigError("a target regressor is required");

    ModelSpec spec;
    spec.outcome = opts.outcome;
    spec.regressors.push_back(opts.target);
    for (const auto& c : opts.controls)
        if (c != opts.target) spec.regressors.push_back(c);
    spec.instruments = opts.instruments;
    spec.endogenous = opts.endogenous;
    if (!spec.instruments.empty() && spec.endogenous.empty()) spec.endogenous = {opts.target};
    spec.intercept = opts.intercept;
    spec.weights = opts.weights_col;
    spec.clusters = opts.cluster_col;

    CsvSchema schema;
    schema.missing = opts.drop_missing ? MissingPolicy::DropRows : MissingPolicy::Strict;
    std::set<std::string> seen;
    const std::set<std::string> categorical(opts.categorical.begin(), opts.categorical.end());
    auto want = [&](const std::string& name) {
        if (!seen.insert(name).second) return;
        if (categorical.count(name)) schema.categorical.push_back(name);
        else schema.numeric.push_back(name);
    };
    want(spec.outcome);
    for (const auto& r : spec.regressors) want(r);
    for (const auto& z : spec.instruments) want(z);
    if (spec.weights) want(*spec.weights);
    if (spec.clusters) want(*spec.clusters);
    for (const auto& c : opts.categorical)
        if (!seen.count(c)) throw ConfigError("categorical column '" + c + "' is not used by the model");

    const LoadResult loaded = load_csv(opts.data, schema);
    LoadedModel m;
    m.rows_read = loaded.rows_read;
    m.rows_dropped = loaded.rows_dropped;
    m.problem = build_problem(loaded.data, spec);
    if (categorical.count(opts.target)) {
        const auto& names = m.problem.regressor_names;
        const auto it = std::find_if(names.begin(), names.end(),
                                     [&](const std::string& n) { return n.rfind(opts.target + "[", 0) == 0; });
        if (it == names.end()) throw SchemaError("categorical target '" + opts.target + "' has a single level");
        m.target = it - names.begin();
    } else {
        m.target = m.problem.index_of(opts.target);
    }
    m.se = sandwich_options(opts);
    return m;
}

QuantityOfInterest build_qoi(QoiKind kind, const AnalyzeOptions& opts, const LoadedModel& model,
                             const FitResult& fit) {
    if (kind == QoiKind::Custom) throw ConfigError("custom quantities are not available from the command line");
    if (kind == QoiKind::Parameter) {
        if (!(opts.direction == 1.0 || opts.direction == -1.0))
            throw ConfigError("direction must be +1 or -1");
        QuantityOfInterest q = QuantityOfInterest::parameter(model.target, opts.direction);
        q.se_options = model.se;
        q.level = opts.model.level;
        q.delta = opts.delta.value_or(0.0);
        return q;
    }
    return make_qoi(kind, fit, model.problem, model.target, model.se, opts.model.level);
}

AnalysisReport analyze(const LoadedModel& model, const AnalyzeOptions& opts) {
    const RegressionProblem& prob = model.problem;
    const WeightVector ones = WeightVector::ones(prob.n_obs());
    const FitResult f = fit(prob, ones);
    const CovarianceEstimate cov = sandwich_covariance(f, prob, ones, model.se);

    AnalysisReport r;
    r.alpha = opts.alpha;
    ModelSummary& m = r.model;
    m.estimator = prob.is_iv() ? "iv" : "ols";
    m.outcome = opts.model.outcome;
    m.target = prob.regressor_names[static_cast<std::size_t>(model.target)];
    m.n_obs = prob.n_obs();
    m.n_params = prob.n_params();
    m.rows_read = model.rows_read;
    m.rows_dropped = model.rows_dropped;
    m.regressors = prob.regressor_names;
    m.theta.assign(f.theta.data(), f.theta.data() + f.theta.size());
    m.standard_errors.assign(cov.standard_errors.data(), cov.standard_errors.data() + cov.standard_errors.size());
    m.se_convention = model.se.se_compat == SeCompat::LmCompatible ? "lm-compat"
                      : model.se.cluster_mode == ClusterMode::ByLabel ? "clustered"
                                                                       : "native";

    for (QoiKind kind : opts.kinds) {
        const QuantityOfInterest q = build_qoi(kind, opts, model, f);
        const InfluenceVector inf = influence_scores(f, prob, q);
        TargetBlock t;
        t.kind = std::string(to_string(kind));
        if (kind != QoiKind::Parameter || opts.delta) t.delta = q.delta;
        t.phi = qoi_value(q, f, prob, ones);
        t.sigma_psi = noise_sigma(f, prob, q, cov);

        const AmisResult sel = amis(inf, opts.alpha);
        const Decomposition dec = decompose(inf, sel, t.sigma_psi);
        t.gamma_alpha = dec.gamma_alpha;
        t.gamma_bound = dec.gamma_bound;
        t.n_removed = static_cast<std::int64_t>(sel.dropped_indices.size());
        t.predicted_change = sel.amip;
        t.dropped_rows = rows_of(prob, sel.dropped_indices);

        std::optional<ApipResult> ap;
        if (t.delta) {
            ap = apip(inf, *t.delta);
            t.alpha_star = ap->alpha_star;
            if (ap->m_removed) t.apip_removed = static_cast<std::int64_t>(*ap->m_removed);
        }
        if (opts.rerun) {
            t.refit = refit_block(model, f, q, sel);
            if (ap && ap->m_removed) t.apip_refit = refit_block(model, f, q, prefix_selection(inf, *ap->m_removed));
        }
        if (opts.certify) t.certificate = certificate_block(model, f, q, sel, opts.lipschitz);

        const std::size_t k = std::min(opts.top_k, inf.sorted_order.size());
        for (std::size_t i = 0; i < k; ++i) {
            const Eigen::Index n = inf.sorted_order[i];
            t.top_rows.push_back({prob.row_ids[static_cast<std::size_t>(n)], inf.psi(n)});
        }
        r.targets.push_back(std::move(t));
    }
    return r;
}

AnalysisReport cmd_analyze(const AnalyzeOptions& opts) { return analyze(load_model(opts.model), opts); }

RerunReport rerun_check(const LoadedModel& model, const RerunOptions& opts) {
    const RegressionProblem& prob = model.problem;
    const WeightVector ones = WeightVector::ones(prob.n_obs());
    const FitResult f = fit(prob, ones);
    const QoiKind kind = first_kind(opts.analysis);
    const QuantityOfInterest q = build_qoi(kind, opts.analysis, model, f);
    const InfluenceVector inf = influence_scores(f, prob, q);
    if (!(opts.flag_tolerance >= 0.0)) throw ConfigError("flag tolerance must be nonnegative");

    RerunReport r;
    r.kind = std::string(to_string(kind));
    r.target = prob.regressor_names[static_cast<std::size_t>(model.target)];
    r.phi = qoi_value(q, f, prob, ones);
    if (kind != QoiKind::Parameter || opts.analysis.delta) r.delta = q.delta;
    r.flag_tolerance = opts.flag_tolerance;

    for (double alpha : opts.alphas) {
        RerunRow row;
        row.alpha = alpha;
        const Eigen::Index m = drop_count(alpha, prob.n_obs());
        if (m == 0) {
            row.exact_change = 0.0;
            row.note = "no removals";
            r.rows.push_back(row);
            continue;
        }
        const AmisResult sel = amis(inf, alpha);
        row.n_removed = static_cast<std::int64_t>(sel.dropped_indices.size());
        row.predicted_change = sel.amip;
        if (sel.dropped_indices.empty()) {
            row.exact_change = 0.0;
            row.note = "no negative scores";
            r.rows.push_back(row);
            continue;
        }
        try {
            const RefitCheck rc = refit_lower_bound(prob, f, q, sel);
            row.exact_change = rc.exact_change;
            if (sel.amip > 0.0) row.relative_error = std::abs(rc.exact_change - sel.amip) / sel.amip;
            if (!row.relative_error || *row.relative_error > opts.flag_tolerance) {
                row.flagged = true;
                row.note = "refit disagrees with prediction";
            }
        } catch (const DegenerateSubsetError& e) {
            row.flagged = true;
            row.note = e.what();
        } catch (const WeakInstrumentError& e) {
            row.flagged = true;
            row.note = e.what();
        }
        r.rows.push_back(std::move(row));
    }
    return r;
}

RerunReport cmd_rerun_check(const RerunOptions& opts) { return rerun_check(load_model(opts.analysis.model), opts); }

CertifyReport certify_report(const LoadedModel& model, const AnalyzeOptions& opts) {
    const RegressionProblem& prob = model.problem;
    const FitResult f = fit(prob, WeightVector::ones(prob.n_obs()));
    const QoiKind kind = first_kind(opts);
    const QuantityOfInterest q = build_qoi(kind, opts, model, f);
    const AmisResult sel = amis(influence_scores(f, prob, q), opts.alpha);

    CertifyReport r;
    r.kind = std::string(to_string(kind));
    r.target = prob.regressor_names[static_cast<std::size_t>(model.target)];
    r.alpha = opts.alpha;
    r.n_removed = static_cast<std::int64_t>(sel.dropped_indices.size());
    r.dropped_rows = rows_of(prob, sel.dropped_indices);
    r.certificate = certificate_block(model, f, q, sel, opts.lipschitz);
    return r;
}

CertifyReport cmd_certify(const AnalyzeOptions& opts) { return certify_report(load_model(opts.model), opts); }

bool is_refusal(const CertifyReport& report) {
    return !report.certificate.valid || !report.certificate.qoi_bound_lin;
}

nlohmann::json to_json(const SingleSimResult& sim) {
    nlohmann::json path = nlohmann::json::array();
    for (const PathPoint& p : sim.path)
        path.push_back({{"alpha", p.alpha},
                        {"m_removed", p.m_removed},
                        {"predicted_up", p.predicted_up},
                        {"refit_up", p.refit_up},
                        {"predicted_down", p.predicted_down},
                        {"refit_down", p.refit_down},
                        {"refit_ok", p.refit_ok}});
    const SimConfig& c = sim.config;
    return {{"schema_version", kReportSchemaVersion},
            {"config",
             {{"n", c.n},
              {"sigma_x", c.sigma_x},
              {"sigma_eps", c.sigma_eps},
              {"beta", c.beta},
              {"seed", c.seed},
              {"alpha", c.alpha},
              {"level", c.level}}},
            {"theta_hat", sim.theta_hat},
            {"se", sim.se},
            {"sigma_psi", sim.sigma_psi},
            {"amip", sim.amip},
            {"apip_sign", sim.apip_sign},
            {"apip_significance", sim.apip_significance},
            {"apip_both", sim.apip_both},
            {"path", path}};
}

nlohmann::json to_json(const GridResult& grid) {
    nlohmann::json cells = nlohmann::json::array();
    std::vector<std::optional<double>> apips;
    std::vector<double> ratios;
    for (const GridCell& c : grid.cells) {
        cells.push_back({{"ix", c.ix},
                         {"ie", c.ie},
                         {"sigma_x", c.sigma_x},
                         {"sigma_eps", c.sigma_eps},
                         {"theta_hat", c.theta_hat},
                         {"se", c.se},
                         {"apip_sign", c.apip_sign},
                         {"apip_significance", c.apip_significance},
                         {"apip_both", c.apip_both}});
        apips.push_back(c.apip_sign);
        ratios.push_back(c.sigma_eps / c.sigma_x);
    }
    return {{"schema_version", kReportSchemaVersion},
            {"sigma_x", grid.sigma_x},
            {"sigma_eps", grid.sigma_eps},
            {"spearman_sign_vs_ratio", spearman(apips, ratios)},
            {"cells", cells}};
}

nlohmann::json to_json(const std::vector<GammaRow>& rows, Eigen::Index n, double alpha, std::uint64_t seed) {
    nlohmann::json table = nlohmann::json::array();
    for (const GammaRow& r : rows) table.push_back({{"distribution", r.name}, {"gamma", r.gamma}, {"analytic", r.analytic}});
    return {{"schema_version", kReportSchemaVersion},
            {"n", n},
            {"alpha", alpha},
            {"seed", seed},
            {"standardization", "sample mean 0 and sample variance 1 for every sampled distribution"},
            {"rows", table}};
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->is_usage_error() ? kExitUsage : kExitRuntime;
    return kExitRuntime;
}

nlohmann::json error_json(const std::exception& e) {
    nlohmann::json j = {{"message", e.what()}, {"exit_code", exit_code_for(e)}};
    if (const auto* err = dynamic_cast<const Error*>(&e)) j["kind"] = std::string(to_string(err->kind()));
    else j["kind"] = "internal";
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
        j["row"] = pe->row();
        j["column"] = pe->column();
    }
    return {{"error", j}};
}

}  // namespace amip
