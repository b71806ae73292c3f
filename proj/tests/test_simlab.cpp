#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "amip/error.hpp"
#include "amip/rng.hpp"
#include "amip/simlab.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace amip;

TEST_CASE("generator is reproducible and seeds are separated") {
    Xoshiro256 a(7), b(7), c(8);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
    CHECK(normal_quantile(0.3) == doctest::Approx(-normal_quantile(0.7)).epsilon(1e-15));
}

TEST_CASE("sample moments of the generator") {
    Xoshiro256 g(11);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0, se = 0;
    for (int i = 0; i < n; ++i) {
        const double u = g.uniform();
        CHECK_MESSAGE((u > 0.0 && u < 1.0), "uniform left the open interval");
        su += u;
        const double z = g.normal();
        sn += z;
        sn2 += z * z;
        se += g.exponential();
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(se / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("configuration checks") {
    SimConfig cfg;
    cfg.sigma_x = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.sigma_x = 1.0;
    cfg.n = 5;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.n = 100;
    cfg.sigma_eps = 0.0;
    CHECK_NOTHROW(validate(cfg));
    CHECK_THROWS_AS(gamma_table({"Lognormal"}, 1000), ConfigError);
}

TEST_CASE("same seed gives identical simulations") {
    SimConfig cfg;
    cfg.n = 2000;
    cfg.seed = 5;
    const SingleSimResult a = run_single_sim(cfg), b = run_single_sim(cfg);
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.se == b.se);
    CHECK(a.amip == b.amip);
    cfg.seed = 6;
    CHECK(run_single_sim(cfg).theta_hat != a.theta_hat);
}

TEST_CASE("noise-free outcome has no influence") {
    SimConfig cfg;
    cfg.n = 500;
    cfg.sigma_eps = 0.0;
    const SingleSimResult r = run_single_sim(cfg);
    CHECK(r.theta_hat == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r.amip < 1e-14);
    CHECK(r.sigma_psi < 1e-12);
    for (const PathPoint& p : r.path) {
        CHECK(p.predicted_up == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(p.predicted_down == doctest::Approx(-1.0).epsilon(1e-14));
    }
}

TEST_CASE("removal path refits are close to predictions in the robust regime") {
    SimConfig cfg;
    cfg.sigma_x = 12.3;
    cfg.sigma_eps = 1.2;
    cfg.n = 5000;
    cfg.seed = 3;
    const SingleSimResult r = run_single_sim(cfg);
    REQUIRE(r.path.size() == cfg.path_alphas.size());
    CHECK(!r.apip_sign);
    for (const PathPoint& p : r.path) {
        REQUIRE(p.refit_ok);
        CHECK(p.predicted_up >= r.theta_hat);
        CHECK(p.predicted_down <= r.theta_hat);
        CHECK(p.refit_up - r.theta_hat == doctest::Approx(p.predicted_up - r.theta_hat).epsilon(0.5));
        CHECK(p.refit_down - r.theta_hat == doctest::Approx(p.predicted_down - r.theta_hat).epsilon(0.5));
    }
    std::ostringstream csv;
    write_path_csv(csv, r);
    CHECK(csv.str().rfind("alpha,m_removed,", 0) == 0);
}

TEST_CASE("zero slope flips sign with few removals") {
    SimConfig cfg;
    cfg.n = 2000;
    cfg.beta = 0.0;
    cfg.seed = 9;
    const SingleSimResult r = run_single_sim(cfg);
    REQUIRE(r.apip_sign);
    CHECK(*r.apip_sign < 0.05);
}

TEST_CASE("shape of the tail") {
    CHECK(gamma_table({"Worst case"})[0].gamma == doctest::Approx(std::sqrt(0.01 * 0.99)).epsilon(1e-15));
    const auto rows = gamma_table({"Normal", "Uniform", "Cauchy", "T(3)", "Exponential", "Flipped exp", "Binary(0.5)"}, 200000);
    for (const GammaRow& r : rows) CHECK(std::abs(r.gamma) <= std::sqrt(0.01 * 0.99) + 1e-15);
    CHECK(rows[0].gamma == doctest::Approx(0.0266).epsilon(0.1));
    CHECK(rows[1].gamma == doctest::Approx(0.0172).epsilon(0.1));
    CHECK(rows[2].gamma < rows[3].gamma);
    CHECK(rows[2].gamma < rows[0].gamma);

    const auto again = gamma_table({"Normal"}, 200000);
    CHECK(again[0].gamma == rows[0].gamma);

    std::ostringstream csv;
    write_gamma_csv(csv, rows);
    CHECK(csv.str().find("\"Cauchy\",") != std::string::npos);
}

TEST_CASE("many moderate scores outweigh one extreme score") {
    std::vector<double> light(100, -1.0), heavy(100, -1.0);
    for (int i = 0; i < 10; ++i) light[static_cast<std::size_t>(i)] = 9.0;
    heavy[0] = 99.0;
    const double gl = gamma_from_draws(light, 0.1);
    const double gh = gamma_from_draws(heavy, 0.1);
    CHECK(gl == doctest::Approx(std::sqrt(0.1 * 0.9)).epsilon(1e-14));
    CHECK(gh < gl);
    CHECK(gh == doctest::Approx((99.0 - 9.0) / std::sqrt(99.0) / 100.0).epsilon(1e-12));
}

TEST_CASE("small grid is ordered and thread independent") {
    GridSpec spec;
    spec.sigma_x = {0.4, 2.0, 4.0};
    spec.sigma_eps = {1.25, 6.25, 12.5};
    spec.n = 2000;
    spec.seed = 1;
    setenv("AMIP_THREADS", "1", 1);
    const GridResult one = run_grid(spec);
    setenv("AMIP_THREADS", "4", 1);
    const GridResult four = run_grid(spec);
    unsetenv("AMIP_THREADS");
    REQUIRE(one.cells.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(one.cells[i].theta_hat == four.cells[i].theta_hat);
        CHECK(one.cells[i].apip_sign == four.cells[i].apip_sign);
    }
    CHECK(one.at(2, 0).sigma_x == 4.0);
    CHECK(one.at(2, 0).sigma_eps == 1.25);
    CHECK((!one.at(2, 0).apip_sign || *one.at(2, 0).apip_sign > 0.2));
    REQUIRE(one.at(0, 2).apip_sign);
    CHECK(*one.at(0, 2).apip_sign < 0.05);

    std::ostringstream csv;
    write_grid_csv(csv, one);
    std::size_t lines = 0;
    for (char c : csv.str()) lines += c == '\n';
    CHECK(lines == 10);
}

TEST_CASE("rank correlation") {
    CHECK(spearman({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
    CHECK(spearman({1.0, 2.0, std::nullopt}, {1.0, 2.0, 3.0}) == doctest::Approx(1.0));
    CHECK(spearman({1.0, 1.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0}) == doctest::Approx(0.9486832980505138));
}
