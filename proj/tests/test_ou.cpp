#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "uedhvac/ou.hpp"
#include "uedhvac/rng.hpp"

using namespace uedhvac;

TEST_CASE("stream derivation is deterministic and tag-separated") {
    const auto a = rng::derive(42, "ou-var", 0);
    CHECK(a == rng::derive(42, "ou-var", 0));
    CHECK(a != rng::derive(42, "ou-var", 1));
    CHECK(a != rng::derive(43, "ou-var", 0));
    CHECK(rng::derive(42, "norm") != rng::derive(42, "mc-pass"));
    CHECK(rng::derive(7, "t", 1, 2) != rng::derive(7, "t", 2, 1));

    auto e1 = rng::engine(a);
    auto e2 = rng::engine(a);
    for (int i = 0; i < 16; ++i) CHECK(e1() == e2());
}

TEST_CASE("ou_step matches the update rule on a frozen example") {
    // x=5, mu=2, tau=5, sigma=0.3, dt=1, z=0.7:
    // 5 - 3/5 + 0.3*sqrt(0.4)*0.7
    ou::OUParams p{2.0, 0.3, 5.0};
    const double got = ou::ou_step(5.0, p, 1.0, 0.7);
    CHECK(got == doctest::Approx(4.5328156617270719).epsilon(1e-14));

    // zero noise decays toward mu, never crossing it from above
    double x = 5.0;
    for (int i = 0; i < 50; ++i) {
        const double nx = ou::ou_step(x, p, 1.0, 0.0);
        CHECK(nx < x);
        CHECK(nx >= p.mu_offset);
        x = nx;
    }
}

TEST_CASE("ou_step rejects bad arguments") {
    ou::OUParams p{0.0, 0.3, 5.0};
    CHECK_THROWS_AS(ou::ou_step(0.0, p, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ou::ou_step(0.0, p, -1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ou::ou_step(0.0, {0.0, 0.3, 0.0}, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ou::ou_step(0.0, {0.0, -0.1, 5.0}, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ou::ou_step(std::nan(""), p, 1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(ou::ou_step(0.0, p, 1.0, INFINITY), std::domain_error);
}

TEST_CASE("fit_ou recovers generating parameters within 10% on 1e5 samples") {
    const ou::OUParams truth{2.0, 0.3, 5.0};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto eng = rng::engine(rng::derive(seed, "fit-test"));
        std::normal_distribution<double> z;
        std::vector<double> xs(100000);
        double x = truth.mu_offset;
        for (auto& v : xs) {
            v = x;
            x = ou::ou_step(x, truth, 1.0, z(eng));
        }
        const auto fit = ou::fit_ou(xs, 1.0);
        CHECK(fit.mu_offset == doctest::Approx(truth.mu_offset).epsilon(0.10));
        CHECK(fit.tau == doctest::Approx(truth.tau).epsilon(0.10));
        CHECK(fit.sigma == doctest::Approx(truth.sigma).epsilon(0.10));
    }
}

TEST_CASE("fit_ou rejects degenerate series") {
    std::vector<double> flat(1000, 3.25);
    CHECK_THROWS_AS(ou::fit_ou(flat, 1.0), ou::FitError);

    std::vector<double> ramp(1000);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    CHECK_THROWS_AS(ou::fit_ou(ramp, 1.0), ou::FitError);  // unit slope, no reversion

    CHECK_THROWS_AS(ou::fit_ou(std::vector<double>{1.0, 2.0}, 1.0), std::invalid_argument);
}

TEST_CASE("residualize subtracts the base series") {
    std::vector<double> raw{3.0, 4.0, 5.0};
    std::vector<double> base{1.0, 1.5, 2.0};
    const auto r = ou::residualize(raw, base);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == 2.0);
    CHECK(r[1] == 2.5);
    CHECK(r[2] == 3.0);
    CHECK_THROWS_AS(ou::residualize(raw, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("residualize_ma removes centered moving average") {
    std::vector<double> lin{1, 2, 3, 4, 5, 6};
    // window 2 averages x_i and x_{i+1}; a unit-slope line leaves -0.5
    auto r2 = ou::residualize_ma(lin, 2);
    REQUIRE(r2.size() == 5);
    for (double v : r2) CHECK(v == doctest::Approx(-0.5).epsilon(1e-12));
    // window 3 is symmetric; a line residualizes to zero
    auto r3 = ou::residualize_ma(lin, 3);
    REQUIRE(r3.size() == 4);
    for (double v : r3) CHECK(v == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(ou::residualize_ma(lin, 0), std::invalid_argument);
    CHECK_THROWS_AS(ou::residualize_ma(lin, 7), std::invalid_argument);
}

TEST_CASE("default base trace is a full year inside physical bounds") {
    const auto base = ou::make_default_base_trace();
    REQUIRE(base.size() == ou::kHoursPerYear);
    for (const auto& row : base.rows)
        for (int v = 0; v < ou::kNumVars; ++v) {
            CHECK(row[v] >= ou::kValueLo[v]);
            CHECK(row[v] <= ou::kValueHi[v]);
        }
    CHECK(base.rows[0][4] == 0.0);          // midnight solar
    CHECK(base.rows[100 * 24 + 12][4] > 100.0);  // noon solar
    // summer noon warmer than winter noon
    CHECK(base.rows[(31 + 28 + 31 + 30 + 31 + 30 + 15) * 24 + 14][0] >
          base.rows[15 * 24 + 14][0] + 5.0);
}

TEST_CASE("noisy trace generation is seeded and respects bounds") {
    const auto base = ou::make_default_base_trace();
    ou::EnvConfig cfg;  // zero offsets, default sigma/tau
    const auto a = ou::generate_noisy_trace(base, cfg, 11);
    const auto b = ou::generate_noisy_trace(base, cfg, 11);
    const auto c = ou::generate_noisy_trace(base, cfg, 12);
    REQUIRE(a.size() == ou::kHoursPerYear);
    CHECK(a.rows == b.rows);
    CHECK(a.rows != c.rows);
    for (const auto& row : a.rows)
        for (int v = 0; v < ou::kNumVars; ++v) {
            CHECK(row[v] >= ou::kValueLo[v]);
            CHECK(row[v] <= ou::kValueHi[v]);
        }
}

TEST_CASE("zero-noise config reproduces base plus constant offset") {
    const auto base = ou::make_default_base_trace();
    ou::EnvConfig cfg;
    for (auto& v : cfg.vars) v.sigma = 0.0;
    auto t0 = ou::generate_noisy_trace(base, cfg, 5);
    CHECK(t0.rows == base.rows);

    cfg.vars[0].mu_offset = 5.0;
    auto t5 = ou::generate_noisy_trace(base, cfg, 5);
    for (std::size_t i = 0; i < t5.rows.size(); ++i) {
        const double want =
            std::min(ou::kValueHi[0], std::max(ou::kValueLo[0], base.rows[i][0] + 5.0));
        CHECK(t5.rows[i][0] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("weather csv round-trips bit-exactly and validates input") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "uedhvac_ou_test";
    fs::create_directories(dir);
    const auto path = (dir / "trace.csv").string();

    const auto base = ou::make_default_base_trace();
    ou::write_weather_csv(base, path);
    const auto back = ou::load_weather_csv(path);
    CHECK(back.rows == base.rows);

    {
        std::ofstream f(dir / "bad_header.csv");
        f << "a,b,c\n1,2,3\n";
    }
    CHECK_THROWS_AS(ou::load_weather_csv((dir / "bad_header.csv").string()), ou::CsvError);

    {
        std::ofstream f(dir / "short.csv");
        f << "temp_c,rh_pct,wind_ms,wind_deg,solar_w\n1,2,3,4,5\n";
    }
    CHECK_THROWS_AS(ou::load_weather_csv((dir / "short.csv").string()), ou::CsvError);

    {
        std::ofstream f(dir / "bad_token.csv");
        f << "temp_c,rh_pct,wind_ms,wind_deg,solar_w\n1,2,oops,4,5\n";
    }
    try {
        ou::load_weather_csv((dir / "bad_token.csv").string());
        FAIL("expected CsvError");
    } catch (const ou::CsvError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }

    {
        std::ofstream f(dir / "bad_cols.csv");
        f << "temp_c,rh_pct,wind_ms,wind_deg,solar_w\n1,2,3,4\n";
    }
    CHECK_THROWS_AS(ou::load_weather_csv((dir / "bad_cols.csv").string()), ou::CsvError);

    {
        std::ofstream f(dir / "nonfinite.csv");
        f << "temp_c,rh_pct,wind_ms,wind_deg,solar_w\n1,2,inf,4,5\n";
    }
    CHECK_THROWS_AS(ou::load_weather_csv((dir / "nonfinite.csv").string()), ou::CsvError);

    CHECK_THROWS_AS(ou::load_weather_csv((dir / "absent.csv").string()), ou::CsvError);
}
