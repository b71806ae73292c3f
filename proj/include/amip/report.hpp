#pragma once

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nlohmann {

template <typename T>
struct adl_serializer<std::optional<T>> {
    static void to_json(json& j, const std::optional<T>& v) {
        if (v) j = *v;
        else j = nullptr;
    }
    static void from_json(const json& j, std::optional<T>& v) {
        if (j.is_null()) v.reset();
        else v = j.get<T>();
    }
};

}  // namespace nlohmann

namespace amip {

inline constexpr int kReportSchemaVersion = 1;

struct ModelSummary {
    std::string estimator;
    std::string outcome;
    std::string target;
    std::int64_t n_obs = 0;
    std::int64_t n_params = 0;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
    std::vector<std::string> regressors;
    std::vector<double> theta;
    std::vector<double> standard_errors;
    std::string se_convention;

    bool operator==(const ModelSummary&) const = default;
};

struct InfluentialRow {
    std::size_t row = 0;
    double psi = 0.0;

    bool operator==(const InfluentialRow&) const = default;
};

// One refit after dropping a set of rows. When the reduced design is
// degenerate only `error` and the drop set are meaningful.
struct RefitBlock {
    std::int64_t n_removed = 0;
    std::vector<std::size_t> dropped_rows;
    double refit_estimate = 0.0;
    std::optional<double> refit_se;
    double phi_after = 0.0;
    double predicted_change = 0.0;
    double exact_change = 0.0;
    bool achieved = false;
    std::optional<std::string> error;

    bool operator==(const RefitBlock&) const = default;
};

struct CertificateBlock {
    bool valid = false;
    std::string reason;
    double alpha = 0.0;
    double c_op = 0.0;
    double xi1 = 0.0;
    double xi2 = 0.0;
    double condition_value = 0.0;
    double c_ball = 0.0;
    double bound_lin = 0.0;
    double bound_diff = 0.0;
    std::optional<double> qoi_bound_lin;
    std::optional<double> qoi_bound_diff;
    std::string qoi_reason;
    // Measured ||theta(w) - theta_lin(w)|| and ||theta(w) - theta(1)|| when a
    // refit succeeded.
    std::optional<double> actual_lin;
    std::optional<double> actual_diff;

    bool operator==(const CertificateBlock&) const = default;
};

struct TargetBlock {
    std::string kind;
    std::optional<double> delta;
    double phi = 0.0;
    double sigma_psi = 0.0;
    std::optional<double> gamma_alpha;
    double gamma_bound = 0.0;
    // Greedy removal at the requested proportion.
    std::int64_t n_removed = 0;
    double predicted_change = 0.0;
    std::vector<std::size_t> dropped_rows;
    // Smallest proportion predicted to reach delta, NA when unreachable.
    std::optional<double> alpha_star;
    std::optional<std::int64_t> apip_removed;
    std::optional<RefitBlock> refit;
    std::optional<RefitBlock> apip_refit;
    std::optional<CertificateBlock> certificate;
    std::vector<InfluentialRow> top_rows;

    bool operator==(const TargetBlock&) const = default;
};

struct AnalysisReport {
    int schema_version = kReportSchemaVersion;
    double alpha = 0.0;
    ModelSummary model;
    std::vector<TargetBlock> targets;

    bool operator==(const AnalysisReport&) const = default;
};

struct RerunRow {
    double alpha = 0.0;
    std::int64_t n_removed = 0;
    double predicted_change = 0.0;
    std::optional<double> exact_change;
    // |exact - predicted| / |predicted|, NA when nothing was predicted.
    std::optional<double> relative_error;
    bool flagged = false;
    std::string note;

    bool operator==(const RerunRow&) const = default;
};

struct RerunReport {
    int schema_version = kReportSchemaVersion;
    std::string kind;
    std::string target;
    double phi = 0.0;
    std::optional<double> delta;
    double flag_tolerance = 0.0;
    std::vector<RerunRow> rows;

    bool operator==(const RerunReport&) const = default;
};

struct CertifyReport {
    int schema_version = kReportSchemaVersion;
    std::string kind;
    std::string target;
    double alpha = 0.0;
    std::int64_t n_removed = 0;
    std::vector<std::size_t> dropped_rows;
    CertificateBlock certificate;

    bool operator==(const CertifyReport&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelSummary, estimator, outcome, target, n_obs, n_params, rows_read,
                                   rows_dropped, regressors, theta, standard_errors, se_convention)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(InfluentialRow, row, psi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RefitBlock, n_removed, dropped_rows, refit_estimate, refit_se, phi_after,
                                   predicted_change, exact_change, achieved, error)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertificateBlock, valid, reason, alpha, c_op, xi1, xi2, condition_value, c_ball,
                                   bound_lin, bound_diff, qoi_bound_lin, qoi_bound_diff, qoi_reason, actual_lin,
                                   actual_diff)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TargetBlock, kind, delta, phi, sigma_psi, gamma_alpha, gamma_bound, n_removed,
                                   predicted_change, dropped_rows, alpha_star, apip_removed, refit, apip_refit,
                                   certificate, top_rows)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AnalysisReport, schema_version, alpha, model, targets)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RerunRow, alpha, n_removed, predicted_change, exact_change, relative_error,
                                   flagged, note)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RerunReport, schema_version, kind, target, phi, delta, flag_tolerance, rows)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CertifyReport, schema_version, kind, target, alpha, n_removed, dropped_rows,
                                   certificate)

// Six significant digits; "NA" for a missing value.
std::string format_number(double v);
std::string format_number(const std::optional<double>& v);

std::string render_table(const AnalysisReport& report);
std::string render_table(const RerunReport& report);
std::string render_csv(const AnalysisReport& report);
std::string render_csv(const RerunReport& report);
std::string render_table(const CertifyReport& report);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace amip
