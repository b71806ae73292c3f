#pragma once

#include "amip/certify.hpp"
#include "amip/dataset.hpp"
#include "amip/qoi.hpp"
#include "amip/report.hpp"
#include "amip/sandwich.hpp"
#include "amip/simlab.hpp"

#include "json.hpp"

#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace amip {

struct ModelOptions {
    std::filesystem::path data;
    std::string outcome;
    std::string target;
    std::vector<std::string> controls;
    // Excluded instruments, paired by position with `endogenous`. When
    // endogenous is empty the target is the instrumented regressor.
    std::vector<std::string> instruments;
    std::vector<std::string> endogenous;
    std::vector<std::string> categorical;
    bool intercept = false;
    std::optional<std::string> weights_col;
    std::optional<std::string> cluster_col;
    bool drop_missing = false;
    SeCompat se = SeCompat::Native;
    double level = 1.96;
};

struct AnalyzeOptions {
    ModelOptions model;
    double alpha = 0.01;
    // Target change for the parameter quantity; the reversal kinds derive
    // their own.
    std::optional<double> delta;
    std::vector<QoiKind> kinds = {QoiKind::SignChange, QoiKind::SignificanceChange, QoiKind::SignAndSignificance};
    // +1 asks how far dropping can raise the parameter, -1 how far it can lower it.
    double direction = 1.0;
    bool rerun = false;
    bool certify = false;
    std::optional<LipschitzData> lipschitz;
    std::size_t top_k = 10;
};

struct LoadedModel {
    RegressionProblem problem;
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
    Eigen::Index target = 0;
    SandwichOptions se;
};

LoadedModel load_model(const ModelOptions& opts);

SandwichOptions sandwich_options(const ModelOptions& opts);

QuantityOfInterest build_qoi(QoiKind kind, const AnalyzeOptions& opts, const LoadedModel& model,
                             const FitResult& fit);

AnalysisReport analyze(const LoadedModel& model, const AnalyzeOptions& opts);
AnalysisReport cmd_analyze(const AnalyzeOptions& opts);

struct RerunOptions {
    AnalyzeOptions analysis;
    std::vector<double> alphas = {0.0, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1};
    // Rows whose refit differs from the prediction by more than this
    // fraction of the prediction are flagged.
    double flag_tolerance = 0.25;
};

// Uses the first kind in analysis.kinds.
RerunReport rerun_check(const LoadedModel& model, const RerunOptions& opts);
RerunReport cmd_rerun_check(const RerunOptions& opts);

// Certificate for the greedy drop set of the first kind in opts.kinds.
CertifyReport certify_report(const LoadedModel& model, const AnalyzeOptions& opts);
CertifyReport cmd_certify(const AnalyzeOptions& opts);

// True when the certificate refused either the parameter or the quantity bound.
bool is_refusal(const CertifyReport& report);

nlohmann::json to_json(const SingleSimResult& sim);
nlohmann::json to_json(const GridResult& grid);
nlohmann::json to_json(const std::vector<GammaRow>& rows, Eigen::Index n, double alpha, std::uint64_t seed);

// Exit-code contract: 0 success, 1 runtime or numerical failure, 2 usage or
// schema error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

int exit_code_for(const std::exception& e);
nlohmann::json error_json(const std::exception& e);

}  // namespace amip
