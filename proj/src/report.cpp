#include "amip/report.hpp"

#include "amip/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <system_error>

namespace amip {

namespace {

using Rows = std::vector<std::vector<std::string>>;

// Left-aligned columns separated by two spaces.
void print_aligned(std::ostream& out, const Rows& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        if (width.size() < r.size()) width.resize(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            line += r[i];
            if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
        }
        out << line << '\n';
    }
}

std::string full(double v) {
    if (!std::isfinite(v)) return "NA";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string full(const std::optional<double>& v) { return v ? full(*v) : "NA"; }

template <typename T>
std::string integer(const std::optional<T>& v) {
    return v ? std::to_string(*v) : "NA";
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string join_rows(const std::vector<std::size_t>& rows, std::size_t limit) {
    std::string s;
    for (std::size_t i = 0; i < rows.size() && i < limit; ++i) {
        if (i) s += ' ';
        s += std::to_string(rows[i]);
    }
    if (rows.size() > limit) s += " ...";
    return s;
}

}  // namespace

std::string format_number(double v) {
    if (!std::isfinite(v)) return "NA";
    std::ostringstream s;
    s << std::setprecision(6) << (v == 0.0 ? 0.0 : v);
    return s.str();
}

std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

std::string render_table(const AnalysisReport& r) {
    std::ostringstream out;
    const ModelSummary& m = r.model;
    out << "Model: " << m.estimator << " of " << m.outcome << ", N = " << m.n_obs << ", P = " << m.n_params
        << ", standard errors: " << m.se_convention << '\n';
    if (m.rows_dropped) out << "Rows dropped for missing values: " << m.rows_dropped << '\n';
    Rows coef{{"regressor", "estimate", "std.error"}};
    for (std::size_t j = 0; j < m.regressors.size(); ++j)
        coef.push_back({m.regressors[j], format_number(m.theta[j]), format_number(m.standard_errors[j])});
    print_aligned(out, coef);

    out << "\nTarget: " << m.target << ", alpha = " << format_number(r.alpha) << '\n';
    Rows summary{{"quantity", "delta", "sigma_psi", "gamma_alpha", "n_removed", "predicted", "alpha_star",
                  "apip_removed"}};
    for (const TargetBlock& t : r.targets)
        summary.push_back({t.kind, format_number(t.delta), format_number(t.sigma_psi), format_number(t.gamma_alpha),
                           std::to_string(t.n_removed), format_number(t.predicted_change),
                           format_number(t.alpha_star), integer(t.apip_removed)});
    print_aligned(out, summary);

    Rows refits{{"quantity", "drop set", "n_removed", "refit_estimate", "refit_se", "predicted", "exact_change",
                 "achieved"}};
    auto add_refit = [&refits](const std::string& kind, const std::string& set, const RefitBlock& b) {
        if (b.error) {
            refits.push_back({kind, set, std::to_string(b.n_removed), "NA", "NA", format_number(b.predicted_change),
                              "NA", "no (" + *b.error + ")"});
            return;
        }
        refits.push_back({kind, set, std::to_string(b.n_removed), format_number(b.refit_estimate),
                          format_number(b.refit_se), format_number(b.predicted_change),
                          format_number(b.exact_change), yes_no(b.achieved)});
    };
    for (const TargetBlock& t : r.targets) {
        if (t.refit) add_refit(t.kind, "alpha", *t.refit);
        if (t.apip_refit) add_refit(t.kind, "apip", *t.apip_refit);
    }
    if (refits.size() > 1) {
        out << "\nRefits\n";
        print_aligned(out, refits);
    }

    Rows certs{{"quantity", "valid", "condition", "bound_lin", "bound_diff", "actual_lin", "actual_diff",
                "qoi_bound_lin", "qoi_bound_diff"}};
    for (const TargetBlock& t : r.targets) {
        if (!t.certificate) continue;
        const CertificateBlock& c = *t.certificate;
        certs.push_back({t.kind, c.valid ? "yes" : "no (" + c.reason + ")", format_number(c.condition_value),
                         c.valid ? format_number(c.bound_lin) : "NA", c.valid ? format_number(c.bound_diff) : "NA",
                         format_number(c.actual_lin),
                         format_number(c.actual_diff),
                         c.qoi_bound_lin ? format_number(c.qoi_bound_lin) : "NA (" + c.qoi_reason + ")",
                         format_number(c.qoi_bound_diff)});
    }
    if (certs.size() > 1) {
        out << "\nCertificates\n";
        print_aligned(out, certs);
    }

    for (const TargetBlock& t : r.targets) {
        if (t.top_rows.empty()) continue;
        out << "\nMost influential rows (" << t.kind << ")\n";
        Rows top{{"row", "psi"}};
        for (const InfluentialRow& row : t.top_rows) top.push_back({std::to_string(row.row), format_number(row.psi)});
        print_aligned(out, top);
        if (!t.dropped_rows.empty()) out << "dropped at alpha: " << join_rows(t.dropped_rows, 20) << '\n';
    }
    return out.str();
}

std::string render_table(const RerunReport& r) {
    std::ostringstream out;
    out << "Quantity: " << r.kind << " of " << r.target << ", value " << format_number(r.phi)
        << ", flag when relative error > " << format_number(r.flag_tolerance) << '\n';
    Rows rows{{"alpha", "n_removed", "predicted", "exact", "rel_error", "flagged", "note"}};
    for (const RerunRow& row : r.rows)
        rows.push_back({format_number(row.alpha), std::to_string(row.n_removed), format_number(row.predicted_change),
                        format_number(row.exact_change), format_number(row.relative_error), yes_no(row.flagged),
                        row.note});
    print_aligned(out, rows);
    return out.str();
}

std::string render_table(const CertifyReport& r) {
    std::ostringstream out;
    const CertificateBlock& c = r.certificate;
    out << "Certificate for " << r.kind << " of " << r.target << " after dropping " << r.n_removed
        << " rows (alpha = " << format_number(c.alpha) << ")\n";
    Rows rows{{"valid", c.valid ? "yes" : "no (" + c.reason + ")"},
              {"condition_value", format_number(c.condition_value)},
              {"c_op", format_number(c.c_op)},
              {"xi1", format_number(c.xi1)},
              {"xi2", format_number(c.xi2)},
              {"c_ball", c.valid ? format_number(c.c_ball) : "NA"},
              {"bound_lin", c.valid ? format_number(c.bound_lin) : "NA"},
              {"bound_diff", c.valid ? format_number(c.bound_diff) : "NA"},
              {"actual_lin", format_number(c.actual_lin)},
              {"actual_diff", format_number(c.actual_diff)},
              {"qoi_bound_lin", c.qoi_bound_lin ? format_number(c.qoi_bound_lin) : "NA (" + c.qoi_reason + ")"},
              {"qoi_bound_diff", format_number(c.qoi_bound_diff)}};
    print_aligned(out, rows);
    return out.str();
}

std::string render_csv(const AnalysisReport& r) {
    std::ostringstream out;
    out << "quantity,delta,phi,sigma_psi,gamma_alpha,n_removed,predicted_change,alpha_star,apip_removed,"
           "refit_estimate,refit_se,exact_change,achieved\n";
    for (const TargetBlock& t : r.targets) {
        out << t.kind << ',' << full(t.delta) << ',' << full(t.phi) << ',' << full(t.sigma_psi) << ','
            << full(t.gamma_alpha) << ',' << t.n_removed << ',' << full(t.predicted_change) << ','
            << full(t.alpha_star) << ',' << integer(t.apip_removed) << ',';
        if (t.refit && !t.refit->error)
            out << full(t.refit->refit_estimate) << ',' << full(t.refit->refit_se) << ','
                << full(t.refit->exact_change) << ',' << (t.refit->achieved ? "true" : "false");
        else
            out << "NA,NA,NA,NA";
        out << '\n';
    }
    return out.str();
}

std::string render_csv(const RerunReport& r) {
    std::ostringstream out;
    out << "alpha,n_removed,predicted_change,exact_change,relative_error,flagged,note\n";
    for (const RerunRow& row : r.rows)
        out << full(row.alpha) << ',' << row.n_removed << ',' << full(row.predicted_change) << ','
            << full(row.exact_change) << ',' << full(row.relative_error) << ',' << (row.flagged ? "true" : "false")
            << ",\"" << row.note << "\"\n";
    return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::random_device rd;
    const std::filesystem::path tmp =
        dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << contents;
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
    }
}

}  // namespace amip
