#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "amip/commands.hpp"
#include "amip/report.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace amip;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int exit_code = -1;
    std::string out;
};

std::string cli() {
    const char* p = std::getenv("AMIP_CLI");
    REQUIRE_MESSAGE(p != nullptr, "AMIP_CLI must point at the command-line binary");
    return p;
}

Run run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("amip_cli_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return path / name;
    }
};

std::string toy_args(const fs::path& csv) {
    return "analyze --data " + csv.string() + " --outcome y --target x --qoi param --alpha 0.5 --rerun --certify";
}

}  // namespace

TEST_CASE("two-point regression end to end") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const Run r = run(toy_args(csv) + " --out json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    const json& t = j["targets"][0];
    CHECK(t["predicted_change"].get<double>() == doctest::Approx(0.16).epsilon(1e-6));
    CHECK(t["refit"]["exact_change"].get<double>() == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(t["sigma_psi"].get<double>() == doctest::Approx(0.32).epsilon(1e-6));
    CHECK(t["certificate"]["condition_value"].get<double>() == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(t["certificate"]["bound_lin"].get<double>() == doctest::Approx(0.18 * (0.8 + 0.304 / 0.82)).epsilon(1e-6));
    CHECK(t["certificate"]["actual_lin"].get<double>() == doctest::Approx(0.04).epsilon(1e-6));
    CHECK(t["dropped_rows"] == json::array({1}));
    CHECK(j["schema_version"] == kReportSchemaVersion);
}

TEST_CASE("report survives a JSON round trip") {
    TempDir dir;
    AnalyzeOptions opts;
    opts.model.data = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    opts.model.outcome = "y";
    opts.model.target = "x";
    opts.alpha = 0.5;
    opts.kinds = {QoiKind::Parameter, QoiKind::SignChange, QoiKind::SignificanceChange};
    opts.rerun = true;
    opts.certify = true;
    const AnalysisReport report = cmd_analyze(opts);
    CHECK(json::parse(json(report).dump()).get<AnalysisReport>() == report);

    RerunOptions rr;
    rr.analysis = opts;
    rr.alphas = {0.0, 0.5};
    const RerunReport rerun = cmd_rerun_check(rr);
    CHECK(json::parse(json(rerun).dump()).get<RerunReport>() == rerun);

    const CertifyReport cert = cmd_certify(opts);
    CHECK(json::parse(json(cert).dump()).get<CertifyReport>() == cert);
}

TEST_CASE("table and JSON carry the same numbers") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const json j = json::parse(run(toy_args(csv) + " --out json").out);
    const Run table = run(toy_args(csv));
    REQUIRE(table.exit_code == 0);
    const json& t = j["targets"][0];
    for (const char* key : {"predicted_change", "sigma_psi"})
        CHECK(table.out.find(format_number(t[key].get<double>())) != std::string::npos);
    CHECK(table.out.find(format_number(t["certificate"]["bound_lin"].get<double>())) != std::string::npos);
    CHECK(table.out.find(format_number(t["refit"]["exact_change"].get<double>())) != std::string::npos);
}

TEST_CASE("schema and usage errors exit with 2") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const Run missing = run("analyze --data " + csv.string() + " --outcome y --target profit --error-json");
    CHECK(missing.exit_code == 2);
    const json err = json::parse(missing.out);
    CHECK(err["error"]["message"].get<std::string>().find("profit") != std::string::npos);
    CHECK(err["error"]["exit_code"] == 2);

    CHECK(run("analyze --outcome y --target x").exit_code == 2);
    CHECK(run("analyze --data " + csv.string() + " --outcome y --target x --qoi banana").exit_code == 2);
    CHECK(run("no-such-command").exit_code == 2);
    CHECK(run("--help").exit_code == 0);
}

TEST_CASE("numerical failures exit with 1") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const Run r = run("analyze --data " + csv.string() + " --outcome y --target x --alpha 0.1 --error-json");
    CHECK(r.exit_code == 1);
    CHECK(json::parse(r.out)["error"]["kind"] == "alpha-too-small");
}

TEST_CASE("config file mirrors flags and flags win") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const fs::path cfg = dir.write(
        "cfg.json", json{{"data", csv.string()}, {"outcome", "y"}, {"target", "x"}, {"qoi", {"param"}}, {"alpha", 0.5},
                         {"rerun", true}, {"out", "json"}}
                        .dump());
    const Run a = run("analyze --config " + cfg.string());
    REQUIRE(a.exit_code == 0);
    CHECK(json::parse(a.out)["targets"][0]["refit"]["exact_change"].get<double>() == doctest::Approx(0.2));

    const Run b = run("analyze --config " + cfg.string() + " --direction decrease");
    REQUIRE(b.exit_code == 0);
    CHECK(json::parse(b.out)["targets"][0]["refit"]["refit_estimate"].get<double>() == doctest::Approx(1.0));

    const fs::path nested = dir.write(
        "nested.json", json{{"analyze", {{"data", csv.string()}, {"outcome", "y"}, {"target", "x"}, {"alpha", 0.5},
                                         {"out", "json"}}}}
                           .dump());
    const Run c = run("analyze --config " + nested.string());
    REQUIRE(c.exit_code == 0);
    CHECK(json::parse(c.out)["targets"].size() == 3);
}

TEST_CASE("output file is written in place") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const fs::path out = dir.path / "report.json";
    REQUIRE(run(toy_args(csv) + " --out json --output " + out.string()).exit_code == 0);
    std::ifstream in(out);
    const json j = json::parse(in);
    CHECK(j["targets"][0]["refit"]["achieved"] == true);
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++files;
    CHECK(files == 2);
}

TEST_CASE("rerun check on a sample mean") {
    TempDir dir;
    std::mt19937_64 rng(71);
    std::normal_distribution<double> g(0.0, 1.0);
    std::ostringstream text;
    text << "y,one\n";
    for (int i = 0; i < 200; ++i) text << g(rng) << ",1\n";
    const fs::path csv = dir.write("mean.csv", text.str());
    const Run r = run("rerun-check --data " + csv.string() +
                      " --outcome y --target one --qoi param --alpha-grid 0 0.01 0.05 0.1 --out json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    REQUIRE(j["rows"].size() == 4);
    CHECK(j["rows"][0]["n_removed"] == 0);
    CHECK(j["rows"][0]["exact_change"] == 0.0);
    for (std::size_t i = 1; i < 4; ++i) {
        const json& row = j["rows"][i];
        const double alpha = row["alpha"].get<double>();
        const double m = row["n_removed"].get<double>();
        // Dropping m of N points from a mean scales the change by N / (N - m).
        CHECK(row["relative_error"].get<double>() == doctest::Approx(m / (200.0 - m)).epsilon(1e-9));
        CHECK(row["relative_error"].get<double>() < 2.0 * alpha);
        CHECK(row["flagged"] == false);
    }
}

TEST_CASE("rerun check flags disagreement at large proportions") {
    TempDir dir;
    std::mt19937_64 rng(72);
    std::normal_distribution<double> g(0.0, 1.0);
    std::ostringstream text;
    text << "y,x\n";
    for (int i = 0; i < 200; ++i) {
        const double x = g(rng);
        text << x + 2.0 * g(rng) + 0.3 << ',' << x << '\n';
    }
    const fs::path csv = dir.write("sim.csv", text.str());
    const Run r = run("rerun-check --data " + csv.string() +
                      " --outcome y --target x --intercept --alpha-grid 0.3 --flag-tol 0.25 --out json");
    REQUIRE(r.exit_code == 0);
    const json row = json::parse(r.out)["rows"][0];
    CHECK(row["flagged"] == true);
    CHECK(row["exact_change"].get<double>() > row["predicted_change"].get<double>());
}

TEST_CASE("certify subcommand and strict refusals") {
    TempDir dir;
    const fs::path csv = dir.write("toy.csv", "y,x\n1,1\n4,2\n");
    const std::string base = "certify --data " + csv.string() + " --outcome y --target x --alpha 0.5";
    const Run ok = run(base + " --out json");
    REQUIRE(ok.exit_code == 0);
    const json j = json::parse(ok.out);
    CHECK(j["certificate"]["valid"] == true);
    CHECK(j["certificate"]["condition_value"].get<double>() == doctest::Approx(0.2));

    CHECK(run(base + " --qoi sig").exit_code == 0);
    CHECK(run(base + " --qoi sig --strict").exit_code == 1);
    // The significance drop set removes the high-leverage point.
    CHECK(run(base + " --qoi sig --strict --lipschitz 1 0.5 2 0.1").exit_code == 1);

    std::mt19937_64 rng(73);
    std::normal_distribution<double> g(0.0, 1.0);
    std::ostringstream text;
    text << "y,x\n";
    for (int i = 0; i < 400; ++i) {
        const double x = g(rng);
        text << 0.5 * x + g(rng) << ',' << x << '\n';
    }
    const fs::path big = dir.write("big.csv", text.str());
    const std::string sig = "certify --data " + big.string() + " --outcome y --target x --intercept --alpha 0.01 --qoi sig";
    CHECK(run(sig + " --strict").exit_code == 1);
    const Run given = run(sig + " --strict --lipschitz 1 0.5 2 0.1 --out json");
    CHECK(given.exit_code == 0);
    CHECK(json::parse(given.out)["certificate"]["qoi_bound_lin"].is_number());
}

TEST_CASE("simulation subcommands") {
    const Run sim = run("simulate --n 500 --seed 2 --out csv");
    REQUIRE(sim.exit_code == 0);
    CHECK(sim.out.rfind("alpha,m_removed,", 0) == 0);

    const Run gamma = run("gamma-table --n 20000 --out json");
    REQUIRE(gamma.exit_code == 0);
    const json g = json::parse(gamma.out);
    CHECK(g["rows"].size() == 12);
    CHECK(g["rows"][0]["gamma"].get<double>() == doctest::Approx(0.0995).epsilon(1e-3));
    CHECK(run("gamma-table --distributions Lognormal").exit_code == 2);

    const Run grid = run("grid --n 500 --sigma-x 0.5 4 --sigma-eps 1 10 --out json");
    REQUIRE(grid.exit_code == 0);
    CHECK(json::parse(grid.out)["cells"].size() == 4);
}
