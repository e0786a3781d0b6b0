#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uedhvac/bldg.hpp"
#include "uedhvac/rng.hpp"

using namespace uedhvac;

TEST_CASE("comfort temperature shifts with clothing") {
    CHECK(bldg::comfort_temp(1.0) == doctest::Approx(22.0));
    CHECK(bldg::comfort_temp(0.5) == doctest::Approx(24.5));
    CHECK(bldg::clothing_for_month(1) == 1.0);
    CHECK(bldg::clothing_for_month(3) == 1.0);
    CHECK(bldg::clothing_for_month(4) == 0.5);
    CHECK(bldg::clothing_for_month(9) == 0.5);
    CHECK(bldg::clothing_for_month(10) == 1.0);
    CHECK(bldg::clothing_for_month(12) == 1.0);
}

TEST_CASE("dissatisfaction curve hits its pinned values") {
    CHECK(bldg::ppd_from_pmv(0.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(bldg::ppd_from_pmv(1.0) == doctest::Approx(26.1197).epsilon(5e-5));
    CHECK(bldg::ppd_from_pmv(-1.0) == doctest::Approx(bldg::ppd_from_pmv(1.0)).epsilon(1e-12));
    // monotone away from neutral
    CHECK(bldg::ppd_from_pmv(2.0) > bldg::ppd_from_pmv(1.0));
    CHECK(bldg::ppd_from_pmv(3.0) > bldg::ppd_from_pmv(2.0));

    // 26C indoor, 40% humidity, winter clothing: pmv = 0.3*(26-22) + 0.01*(40-50)
    const double ppd = bldg::compute_ppd(26.0, 40.0, 1.0);
    CHECK(ppd == doctest::Approx(bldg::ppd_from_pmv(1.1)).epsilon(1e-12));
}

TEST_CASE("reward matches frozen examples exactly") {
    bldg::RewardParams rp;
    CHECK(bldg::compute_reward(5000.0, 30.0, 2, rp) == doctest::Approx(-1.75).epsilon(1e-12));
    // at threshold, the comfort term stays off
    CHECK(bldg::compute_reward(5000.0, 20.0, 2, rp) == doctest::Approx(-0.25).epsilon(1e-12));
    // unoccupied: only energy is charged
    CHECK(bldg::compute_reward(5000.0, 80.0, 0, rp) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(bldg::compute_reward(0.0, 0.0, 0, rp) == 0.0);
    // never positive
    auto eng = rng::engine(1);
    std::uniform_real_distribution<double> up(0.0, 20000.0), ud(0.0, 100.0);
    std::uniform_int_distribution<int> uo(0, 10);
    for (int i = 0; i < 1000; ++i)
        CHECK(bldg::compute_reward(up(eng), ud(eng), uo(eng), rp) <= 0.0);
}

TEST_CASE("thermostat demand is proportional with saturation") {
    const auto cold = bldg::hvac_demand(18.0, 20.0, 26.0);
    CHECK(cold.q_heat == doctest::Approx(4000.0));
    CHECK(cold.q_cool == 0.0);
    const auto hot = bldg::hvac_demand(28.0, 20.0, 26.0);
    CHECK(hot.q_heat == 0.0);
    CHECK(hot.q_cool == doctest::Approx(-4000.0));
    const auto band = bldg::hvac_demand(23.0, 20.0, 26.0);
    CHECK(band.q_heat == 0.0);
    CHECK(band.q_cool == 0.0);
    CHECK(bldg::hvac_demand(5.0, 20.0, 26.0).q_heat == doctest::Approx(10000.0));
    CHECK(bldg::hvac_demand(45.0, 20.0, 26.0).q_cool == doctest::Approx(-10000.0));
}

TEST_CASE("electric power splits heating and cooling efficiencies") {
    CHECK(bldg::electric_power({4500.0, 0.0}) == doctest::Approx(5000.0).epsilon(1e-12));
    CHECK(bldg::electric_power({0.0, -3000.0}) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(bldg::electric_power({0.0, 0.0}) == 0.0);
    CHECK(bldg::electric_power({900.0, -300.0}) == doctest::Approx(1100.0).epsilon(1e-12));
}

TEST_CASE("thermal step matches a hand-computed value") {
    // T=20, T_out=10, q=5000 W, dt=1h:
    // 20 + 3600/2e7 * ((10-20)/0.005 + 5000) = 20 + 1.8e-4 * 3000
    const double t1 = bldg::thermal_step(20.0, 10.0, 5000.0, 0.0, 0.0, 1.0);
    CHECK(t1 == doctest::Approx(20.54).epsilon(1e-12));
    // no forcing, equal temperatures: stays put
    CHECK(bldg::thermal_step(20.0, 20.0, 0.0, 0.0, 0.0, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("occupancy follows the office schedule") {
    // month/day are 1-based; Jan 1 of the model year is a Monday
    CHECK(bldg::occupancy_schedule(1, 1, 9) == 10);
    CHECK(bldg::occupancy_schedule(1, 1, 7) == 0);
    CHECK(bldg::occupancy_schedule(1, 1, 8) == 10);
    CHECK(bldg::occupancy_schedule(1, 1, 17) == 10);
    CHECK(bldg::occupancy_schedule(1, 1, 18) == 0);
    CHECK(bldg::occupancy_schedule(1, 6, 12) == 0);  // Saturday
    CHECK(bldg::occupancy_schedule(1, 7, 12) == 0);  // Sunday
    CHECK(bldg::occupancy_schedule(1, 8, 12) == 10); // next Monday
}

TEST_CASE("rule-based controller widens setpoints when empty") {
    bldg::Observation obs{};
    obs[bldg::kObsOccupancy] = 0.0;
    obs[bldg::kObsMonth] = 1.0;
    auto a = bldg::rbc_policy(obs);
    CHECK(a.cooling_sp == doctest::Approx(30.0));
    CHECK(a.heating_sp == doctest::Approx(15.0));

    obs[bldg::kObsOccupancy] = 10.0;
    obs[bldg::kObsMonth] = 7.0;
    a = bldg::rbc_policy(obs);
    CHECK(a.cooling_sp == doctest::Approx(29.0));
    CHECK(a.heating_sp == doctest::Approx(22.5));

    obs[bldg::kObsMonth] = 1.0;
    a = bldg::rbc_policy(obs);
    CHECK(a.cooling_sp == doctest::Approx(23.5));
    CHECK(a.heating_sp == doctest::Approx(20.0));
}

namespace {

bldg::BuildingEnv make_env(double dt = 1.0, std::uint64_t seed = 7,
                           std::optional<int> occ_override = std::nullopt,
                           std::array<double, 5> sigma_scale = {1, 1, 1, 1, 1}) {
    static const auto base = ou::make_default_base_trace();
    ou::EnvConfig cfg;
    for (int v = 0; v < ou::kNumVars; ++v) cfg.vars[v].sigma *= sigma_scale[v];
    bldg::EnvOptions opt;
    opt.dt = dt;
    opt.occupancy_override = occ_override;
    return bldg::BuildingEnv(&base, cfg, opt, seed);
}

}  // namespace

TEST_CASE("environment resets deterministically") {
    auto e1 = make_env();
    auto e2 = make_env();
    auto o1 = e1.reset();
    auto o2 = e2.reset();
    CHECK(o1 == o2);
    bldg::Action act{26.0, 20.0};
    for (int i = 0; i < 100; ++i) {
        auto r1 = e1.step(act);
        auto r2 = e2.step(act);
        CHECK(r1.obs == r2.obs);
        CHECK(r1.reward == r2.reward);
        CHECK(r1.done == r2.done);
    }
}

TEST_CASE("episode length scales with dt and terminates") {
    auto e = make_env(0.5);
    CHECK(e.steps_per_episode() == 2 * ou::kHoursPerYear);
    auto e1 = make_env(1.0);
    CHECK(e1.steps_per_episode() == ou::kHoursPerYear);
    e1.reset();
    bldg::Action act{26.0, 20.0};
    for (int i = 0; i < ou::kHoursPerYear - 1; ++i) CHECK(!e1.step(act).done);
    CHECK(e1.step(act).done);
}

TEST_CASE("environment rejects invalid construction") {
    static const auto base = ou::make_default_base_trace();
    ou::EnvConfig cfg;
    bldg::EnvOptions opt;
    opt.dt = 0.3;
    CHECK_THROWS_AS(bldg::BuildingEnv(&base, cfg, opt, 1), std::invalid_argument);

    opt.dt = 1.0;
    cfg.vars[0].mu_offset = ou::kOffsetHi[0] + 1.0;
    CHECK_THROWS_AS(bldg::BuildingEnv(&base, cfg, opt, 1), std::invalid_argument);

    cfg.vars[0].mu_offset = 0.0;
    ou::WeatherTrace crop;
    crop.rows.assign(100, {20.0, 50.0, 2.0, 180.0, 0.0});
    CHECK_THROWS_AS(bldg::BuildingEnv(&crop, cfg, opt, 1), std::invalid_argument);
}

TEST_CASE("wider deadband never costs more energy") {
    auto tight = make_env(1.0, 99);
    auto wide = make_env(1.0, 99);
    tight.reset();
    wide.reset();
    double e_tight = 0.0, e_wide = 0.0;
    for (int i = 0; i < 500; ++i) {
        auto rt = tight.step({24.0, 21.0});
        auto rw = wide.step({28.0, 16.0});
        e_tight += rt.obs[bldg::kObsDemand];
        e_wide += rw.obs[bldg::kObsDemand];
    }
    CHECK(e_wide <= e_tight);
    CHECK(e_tight > 0.0);
}

TEST_CASE("indoor temperature is pulled into the deadband") {
    auto e = make_env(1.0, 3);
    e.reset();
    bldg::Action act{24.0, 21.0};
    bldg::StepResult r{};
    for (int i = 0; i < 400; ++i) r = e.step(act);
    CHECK(r.obs[bldg::kObsInTemp] > 19.0);
    CHECK(r.obs[bldg::kObsInTemp] < 26.0);
}

TEST_CASE("substep refinement converges first order in dt") {
    // zero weather noise so trajectories are comparable across dt
    auto e1 = make_env(1.0, 5, std::nullopt, {0, 0, 0, 0, 0});
    auto e2 = make_env(0.5, 5, std::nullopt, {0, 0, 0, 0, 0});
    auto e4 = make_env(0.25, 5, std::nullopt, {0, 0, 0, 0, 0});
    e1.reset();
    e2.reset();
    e4.reset();
    bldg::Action act{26.0, 20.0};
    double d12 = 0.0, d24 = 0.0;
    for (int hour = 1; hour <= 600; ++hour) {
        const auto r1 = e1.step(act);
        bldg::StepResult r2{}, r4{};
        for (int k = 0; k < 2; ++k) r2 = e2.step(act);
        for (int k = 0; k < 4; ++k) r4 = e4.step(act);
        d12 = std::max(d12, std::abs(r1.obs[bldg::kObsInTemp] - r2.obs[bldg::kObsInTemp]));
        d24 = std::max(d24, std::abs(r2.obs[bldg::kObsInTemp] - r4.obs[bldg::kObsInTemp]));
    }
    CHECK(d12 < 0.5);
    CHECK(d24 < d12);
}

TEST_CASE("occupancy override removes the comfort term") {
    auto e = make_env(1.0, 21, 0);
    e.reset();
    bldg::RewardParams rp;
    for (int i = 0; i < 300; ++i) {
        auto r = e.step({26.0, 20.0});
        CHECK(r.obs[bldg::kObsOccupancy] == 0.0);
        const double expect = -rp.rho * rp.lambda_e * r.obs[bldg::kObsDemand];
        CHECK(r.reward == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("observations stay finite and in range over a full episode") {
    auto e = make_env(1.0, 17);
    e.reset();
    auto eng = rng::engine(4);
    double reward_sum = 0.0;
    for (int i = 0; i < e.steps_per_episode(); ++i) {
        const auto a = bldg::random_policy(eng);
        const auto r = e.step(a);
        for (double v : r.obs) CHECK(std::isfinite(v));
        CHECK(r.reward <= 0.0);
        CHECK(r.obs[bldg::kObsInRh] >= 0.0);
        CHECK(r.obs[bldg::kObsInRh] <= 100.0);
        CHECK(r.obs[bldg::kObsHour] >= 0.0);
        CHECK(r.obs[bldg::kObsHour] < 24.0);
        reward_sum += r.reward;
    }
    CHECK(reward_sum < 0.0);
}
