#include "CLI11.hpp"
#include "json.hpp"

#include "amip/commands.hpp"
#include "amip/error.hpp"
#include "amip/report.hpp"
#include "amip/simlab.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace amip;
using nlohmann::json;

namespace {

// Reads a JSON object whose keys are long flag names (dashes or
// underscores) of the subcommand being run. Keys under an object named after
// that subcommand override the top-level ones.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* app) : app_(app) {}

    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
        const auto active = app_->get_subcommands();
        if (active.empty()) return {};
        const std::string section = active.front()->get_name();
        json flat = json::object();
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!it.value().is_object()) flat[it.key()] = it.value();
        if (j.contains(section) && j[section].is_object()) flat.update(j[section]);

        std::vector<CLI::ConfigItem> items;
        for (auto it = flat.begin(); it != flat.end(); ++it) {
            CLI::ConfigItem item;
            item.parents = {section};
            item.name = it.key();
            std::replace(item.name.begin(), item.name.end(), '_', '-');
            const json& v = it.value();
            if (v.is_array()) {
                for (const json& e : v) item.inputs.push_back(scalar(e));
            } else {
                item.inputs.push_back(scalar(v));
            }
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        if (v.is_number()) return v.dump();
        throw CLI::ConversionError("config values must be strings, numbers, booleans or arrays of those");
    }

    const CLI::App* app_;
};

struct Output {
    std::string format = "table";
    std::string path;
};

void add_output(CLI::App* sub, Output& out, std::vector<std::string> formats) {
    sub->add_option("--out", out.format, "Output format")->check(CLI::IsMember(std::move(formats)));
    sub->add_option("--output", out.path, "Write output to this file instead of stdout");
}

void emit(const Output& out, const std::string& text) {
    if (out.path.empty()) std::cout << text << std::flush;
    else write_file_atomic(out.path, text);
}

void add_model(CLI::App* sub, ModelOptions& m, std::string& se) {
    sub->add_option("--data", m.data, "CSV file with a header row")->required();
    sub->add_option("--outcome", m.outcome, "Outcome column")->required();
    sub->add_option("--target", m.target, "Regressor whose coefficient is studied")->required();
    sub->add_option("--controls", m.controls, "Additional regressors");
    sub->add_option("--instruments", m.instruments, "Excluded instruments (IV)");
    sub->add_option("--endogenous", m.endogenous, "Instrumented regressors, paired with --instruments; default the target");
    sub->add_option("--categorical", m.categorical, "Columns read as categorical and expanded to dummies");
    sub->add_flag("--intercept", m.intercept, "Include an intercept");
    sub->add_option("--weights-col", m.weights_col, "Column of positive observation weights");
    sub->add_option("--cluster-col", m.cluster_col, "Column of cluster labels for clustered standard errors");
    sub->add_flag("--drop-missing", m.drop_missing, "Drop rows with missing values instead of failing");
    sub->add_option("--se", se, "Standard error convention")->check(CLI::IsMember({"native", "lm-compat"}));
    sub->add_option("--level", m.level, "Critical value for significance")->check(CLI::NonNegativeNumber);
}

struct QoiArgs {
    std::vector<std::string> kinds;
    std::string direction = "increase";
    std::vector<double> lipschitz;
};

void add_qoi(CLI::App* sub, AnalyzeOptions& a, QoiArgs& q, bool many) {
    auto* opt = sub->add_option("--qoi", q.kinds, many ? "Quantities: sign, sig, both, param" : "Quantity: sign, sig, both, param")
                    ->check(CLI::IsMember({"sign", "sig", "both", "param"}));
    if (!many) opt->expected(1);
    sub->add_option("--alpha", a.alpha, "Proportion of rows that may be dropped")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--delta", a.delta, "Target change for the param quantity");
    sub->add_option("--direction", q.direction, "Direction of change for the param quantity")
        ->check(CLI::IsMember({"increase", "decrease"}));
    sub->add_option("--lipschitz", q.lipschitz, "Smoothness constants L_theta L_omega C_theta C_omega for nonlinear quantities")
        ->expected(4);
}

void finish_analysis(AnalyzeOptions& a, const QoiArgs& q, const std::string& se) {
    if (!q.kinds.empty()) {
        a.kinds.clear();
        for (const auto& k : q.kinds) a.kinds.push_back(parse_qoi_kind(k));
    }
    a.direction = q.direction == "decrease" ? -1.0 : 1.0;
    if (!q.lipschitz.empty()) a.lipschitz = LipschitzData{q.lipschitz[0], q.lipschitz[1], q.lipschitz[2], q.lipschitz[3]};
    a.model.se = se == "lm-compat" ? SeCompat::LmCompatible : SeCompat::Native;
}

std::string table_for(const SingleSimResult& s) {
    std::ostringstream out;
    out << "theta_hat " << format_number(s.theta_hat) << "  se " << format_number(s.se) << "  sigma_psi "
        << format_number(s.sigma_psi) << "  amip " << format_number(s.amip) << '\n';
    out << "apip sign " << format_number(s.apip_sign) << "  significance " << format_number(s.apip_significance)
        << "  both " << format_number(s.apip_both) << "\n\n";
    out << "alpha      m  predicted_up  refit_up  predicted_down  refit_down\n";
    for (const PathPoint& p : s.path)
        out << format_number(p.alpha) << "  " << p.m_removed << "  " << format_number(p.predicted_up) << "  "
            << (p.refit_ok ? format_number(p.refit_up) : "NA") << "  " << format_number(p.predicted_down) << "  "
            << (p.refit_ok ? format_number(p.refit_down) : "NA") << '\n';
    return out.str();
}

std::string table_for(const GridResult& g, const std::string& field) {
    std::ostringstream out;
    out << "APIP (" << field << "); rows sigma_eps, columns sigma_x\n" << "sigma_eps";
    for (double sx : g.sigma_x) out << '\t' << format_number(sx);
    out << '\n';
    for (std::size_t ie = 0; ie < g.sigma_eps.size(); ++ie) {
        out << format_number(g.sigma_eps[ie]);
        for (std::size_t ix = 0; ix < g.sigma_x.size(); ++ix) {
            const GridCell& c = g.at(ix, ie);
            const auto& v = field == "sign" ? c.apip_sign : field == "sig" ? c.apip_significance : c.apip_both;
            out << '\t' << format_number(v);
        }
        out << '\n';
    }
    return out.str();
}

std::string gamma_table_text(const std::vector<GammaRow>& rows) {
    std::ostringstream out;
    std::size_t w = 12;
    for (const auto& r : rows) w = std::max(w, r.name.size());
    out << std::string("distribution") + std::string(w - 12 + 2, ' ') << "gamma\n";
    for (const auto& r : rows)
        out << r.name << std::string(w - r.name.size() + 2, ' ') << format_number(r.gamma)
            << (r.analytic ? "  (analytic)" : "") << '\n';
    return out.str();
}

int run(int argc, char** argv, bool error_json_requested) {
    CLI::App app{"Sensitivity of regression conclusions to dropping a small fraction of the data"};
    app.require_subcommand(1);
    bool error_json_flag = error_json_requested;
    app.add_flag("--error-json", error_json_flag, "On failure print a JSON error object on stdout");
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON file mirroring the subcommand flags; command-line flags win");

    // analyze
    AnalyzeOptions an;
    QoiArgs an_q;
    std::string an_se = "native";
    Output an_out;
    bool an_strict = false;
    CLI::App* analyze = app.add_subcommand("analyze", "Fit, score, and report the most influential drop sets");
    add_model(analyze, an.model, an_se);
    add_qoi(analyze, an, an_q, true);
    analyze->add_flag("--rerun", an.rerun, "Refit without the selected rows");
    analyze->add_flag("--certify", an.certify, "Attach finite-sample error certificates");
    analyze->add_option("--top", an.top_k, "Number of most influential rows to list");
    analyze->add_option("--seed", "Accepted for interface symmetry; the analysis is deterministic");
    analyze->add_flag("--strict", an_strict, "Exit 1 when a requested certificate is refused");
    add_output(analyze, an_out, {"json", "csv", "table"});

    // rerun-check
    RerunOptions rr;
    QoiArgs rr_q;
    std::string rr_se = "native";
    Output rr_out;
    CLI::App* rerun = app.add_subcommand("rerun-check", "Compare predicted and refit changes over a grid of proportions");
    add_model(rerun, rr.analysis.model, rr_se);
    add_qoi(rerun, rr.analysis, rr_q, false);
    rerun->add_option("--alpha-grid", rr.alphas, "Proportions to check");
    rerun->add_option("--flag-tol", rr.flag_tolerance, "Relative disagreement that flags a row")
        ->check(CLI::NonNegativeNumber);
    add_output(rerun, rr_out, {"json", "csv", "table"});

    // certify
    AnalyzeOptions ce;
    QoiArgs ce_q;
    std::string ce_se = "native";
    Output ce_out;
    bool ce_strict = false;
    CLI::App* certify = app.add_subcommand("certify", "Finite-sample bounds on the linear approximation error");
    add_model(certify, ce.model, ce_se);
    add_qoi(certify, ce, ce_q, false);
    certify->add_flag("--strict", ce_strict, "Exit 1 when the certificate is refused");
    add_output(certify, ce_out, {"json", "table"});

    // simulate
    SimConfig sim;
    Output sim_out;
    CLI::App* simulate = app.add_subcommand("simulate", "Simulate y = beta x + eps and trace the removal path");
    simulate->add_option("--n", sim.n, "Sample size");
    simulate->add_option("--sigma-x", sim.sigma_x, "Regressor scale");
    simulate->add_option("--sigma-eps", sim.sigma_eps, "Noise scale");
    simulate->add_option("--beta", sim.beta, "True slope");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--alpha", sim.alpha, "Proportion for the reported AMIP");
    simulate->add_option("--level", sim.level, "Critical value for significance");
    simulate->add_option("--path-alphas", sim.path_alphas, "Proportions along the removal path");
    add_output(simulate, sim_out, {"json", "csv", "table"});

    // gamma-table
    std::vector<std::string> distributions = default_gamma_distributions();
    Eigen::Index gamma_n = 1'000'000;
    double gamma_alpha = 0.01;
    std::uint64_t gamma_seed = 0;
    Output gamma_out;
    CLI::App* gamma = app.add_subcommand("gamma-table", "Tail shape of standardized draws for named distributions");
    gamma->add_option("--distributions", distributions, "Distribution names");
    gamma->add_option("--n", gamma_n, "Draws per distribution");
    gamma->add_option("--alpha", gamma_alpha, "Tail proportion")->check(CLI::Range(0.0, 1.0));
    gamma->add_option("--seed", gamma_seed, "Random seed");
    add_output(gamma, gamma_out, {"json", "csv", "table"});

    // grid
    GridSpec grid_spec = GridSpec::standard();
    std::string grid_field = "sign";
    Output grid_out;
    CLI::App* grid = app.add_subcommand("grid", "APIP over a grid of regressor and noise scales");
    grid->add_option("--sigma-x", grid_spec.sigma_x, "Regressor scales");
    grid->add_option("--sigma-eps", grid_spec.sigma_eps, "Noise scales");
    grid->add_option("--n", grid_spec.n, "Sample size per cell");
    grid->add_option("--beta", grid_spec.beta, "True slope");
    grid->add_option("--seed", grid_spec.seed, "Base seed");
    grid->add_option("--replicates", grid_spec.replicates, "Replicates averaged per cell")->check(CLI::PositiveNumber);
    grid->add_option("--level", grid_spec.level, "Critical value for significance");
    grid->add_option("--field", grid_field, "Quantity shown in the table output")
        ->check(CLI::IsMember({"sign", "sig", "both"}));
    add_output(grid, grid_out, {"json", "csv", "table"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        if (error_json_flag)
            std::cout << json{{"error", {{"kind", "Usage"}, {"message", e.what()}, {"exit_code", kExitUsage}}}}.dump(2)
                      << '\n';
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*analyze) {
            finish_analysis(an, an_q, an_se);
            const AnalysisReport r = cmd_analyze(an);
            if (an_out.format == "json") emit(an_out, json(r).dump(2) + "\n");
            else if (an_out.format == "csv") emit(an_out, render_csv(r));
            else emit(an_out, render_table(r));
            if (an_strict)
                for (const auto& t : r.targets)
                    if (t.certificate && (!t.certificate->valid || !t.certificate->qoi_bound_lin)) return kExitRuntime;
        } else if (*rerun) {
            finish_analysis(rr.analysis, rr_q, rr_se);
            if (rr_q.kinds.empty()) rr.analysis.kinds = {QoiKind::SignChange};
            const RerunReport r = cmd_rerun_check(rr);
            if (rr_out.format == "json") emit(rr_out, json(r).dump(2) + "\n");
            else if (rr_out.format == "csv") emit(rr_out, render_csv(r));
            else emit(rr_out, render_table(r));
        } else if (*certify) {
            finish_analysis(ce, ce_q, ce_se);
            if (ce_q.kinds.empty()) ce.kinds = {QoiKind::Parameter};
            const CertifyReport r = cmd_certify(ce);
            if (ce_out.format == "json") emit(ce_out, json(r).dump(2) + "\n");
            else emit(ce_out, render_table(r));
            if (ce_strict && is_refusal(r)) return kExitRuntime;
        } else if (*simulate) {
            const SingleSimResult s = run_single_sim(sim);
            if (sim_out.format == "json") {
                emit(sim_out, to_json(s).dump(2) + "\n");
            } else if (sim_out.format == "csv") {
                std::ostringstream o;
                write_path_csv(o, s);
                emit(sim_out, o.str());
            } else {
                emit(sim_out, table_for(s));
            }
        } else if (*gamma) {
            const auto rows = gamma_table(distributions, gamma_n, gamma_alpha, gamma_seed);
            if (gamma_out.format == "json") {
                emit(gamma_out, to_json(rows, gamma_n, gamma_alpha, gamma_seed).dump(2) + "\n");
            } else if (gamma_out.format == "csv") {
                std::ostringstream o;
                write_gamma_csv(o, rows);
                emit(gamma_out, o.str());
            } else {
                emit(gamma_out, gamma_table_text(rows));
            }
        } else if (*grid) {
            const GridResult g = run_grid(grid_spec);
            if (grid_out.format == "json") {
                emit(grid_out, to_json(g).dump(2) + "\n");
            } else if (grid_out.format == "csv") {
                std::ostringstream o;
                write_grid_csv(o, g);
                emit(grid_out, o.str());
            } else {
                emit(grid_out, table_for(g, grid_field));
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (error_json_flag) std::cout << error_json(e).dump(2) << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    bool error_json = false;
    std::vector<char*> args{argv[0]};
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--error-json") == 0) error_json = true;
        else args.push_back(argv[i]);
    }
    return run(static_cast<int>(args.size()), args.data(), error_json);
}
