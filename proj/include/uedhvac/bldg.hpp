// Single-zone RC building simulator: deadband HVAC with proportional demand,
// an office occupancy schedule, the PPD comfort proxy, the energy/comfort
// reward, and the rule-based/random baseline controllers.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>

#include "uedhvac/ou.hpp"

namespace uedhvac::bldg {

// Surrogate physics constants for a ~463 m^2 single-story zone.
inline constexpr double kCth = 2.0e7;              // J/K lumped thermal capacitance
inline constexpr double kRth = 0.005;              // K/W envelope resistance
inline constexpr double kQmax = 10'000.0;          // W HVAC capacity
inline constexpr double kThermostatGain = 2000.0;  // W/K proportional demand
inline constexpr double kEtaHeat = 0.9;
inline constexpr double kCopCool = 3.0;
inline constexpr double kQPerOccupant = 100.0;            // W
inline constexpr double kSolarAperture = 0.05 * 46.36;    // m^2 equivalent
inline constexpr double kRhRelaxPerHour = 0.2;

inline constexpr double kCoolLo = 22.5, kCoolHi = 30.0;
inline constexpr double kHeatLo = 15.0, kHeatHi = 22.5;

inline constexpr int kObsDim = 17;
// Observation layout. Indices 0-4 are the weather slice carrying phi.
inline constexpr int kObsOutTemp = 0, kObsOutRh = 1, kObsWind = 2, kObsWindDir = 3,
                     kObsSolar = 4, kObsInTemp = 5, kObsInRh = 6, kObsClo = 7, kObsPpd = 8,
                     kObsHeatSp = 9, kObsCoolSp = 10, kObsDemand = 11, kObsOccupancy = 12,
                     kObsYear = 13, kObsMonth = 14, kObsDay = 15, kObsHour = 16;

using Observation = std::array<double, kObsDim>;

struct Action {
    double cooling_sp = 26.0;  // degC, [22.5, 30]
    double heating_sp = 20.0;  // degC, [15, 22.5]
};

struct RewardParams {
    double rho = 0.5;            // comfort/energy weight
    double lambda_e = 1e-4;      // 1/W
    double lambda_p = 0.1;       // 1/%PPD
    double ppd_threshold = 20.0; // %
};

// -- pure physics / comfort helpers -- //

struct HvacDemand {
    double q_heat = 0.0;  // W, >= 0
    double q_cool = 0.0;  // W, <= 0
};

// Deadband thermostat with proportional demand, saturating at kQmax.
HvacDemand hvac_demand(double t_in, double heating_sp, double cooling_sp);

// Electric draw: heating at combustion efficiency, cooling at COP.
double electric_power(const HvacDemand& d);

// Explicit-Euler RC update over dt hours; q terms in W.
double thermal_step(double t_in, double t_out, double q_hvac, double q_occ, double q_solar,
                    double dt_hours);

double comfort_temp(double clo);  // 22 at 1.0 clo, 24.5 at 0.5 clo, linear
double compute_ppd(double t_in, double rh, double clo);
double ppd_from_pmv(double pmv);
double clothing_for_month(int month);  // 1.0 clo Oct-Mar, 0.5 Apr-Sep

// Weekdays 08:00-17:59 -> 10 occupants, else 0. Non-leap calendar with
// Jan 1 a Monday; month/day are 1-based.
int occupancy_schedule(int month, int day, int hour);

// R = -rho*lambda_e*P - (1-rho)*lambda_p*PPD*1(occ>0)*1(PPD>threshold); <= 0.
double compute_reward(double p_elec, double ppd, int occupancy, const RewardParams& params);

Action rbc_policy(const Observation& obs);
Action random_policy(std::mt19937_64& rng);

// -- the simulator -- //

struct EnvOptions {
    double dt = 1.0;  // hours; one of {1.0, 0.5, 0.25}
    RewardParams reward;
    std::optional<int> occupancy_override;  // testing hook: fixes the schedule output
    std::array<double, ou::kNumVars> phi_lo = ou::kOffsetLo;
    std::array<double, ou::kNumVars> phi_hi = ou::kOffsetHi;
};

struct StepResult {
    Observation obs{};
    double reward = 0.0;
    bool done = false;
};

class BuildingEnv {
  public:
    // `base` must outlive the env. Throws std::invalid_argument on bad dt or
    // phi outside the configured offset bounds.
    BuildingEnv(const ou::WeatherTrace* base, const ou::EnvConfig& cfg, const EnvOptions& opt,
                std::uint64_t seed);

    Observation reset();
    // One dt-hour interval: HVAC demand from the pre-step indoor temp and the
    // commanded deadband, occupant heat from the interval-start occupancy;
    // the returned observation, PPD, and the reward's occupancy gate all
    // describe the post-step instant.
    StepResult step(const Action& action);

    int steps_per_episode() const { return steps_per_episode_; }
    double dt() const { return opt_.dt; }
    const ou::EnvConfig& config() const { return cfg_; }
    const Observation& observation() const { return obs_; }

  private:
    std::array<double, ou::kNumVars> weather_at(double hour_of_year) const;
    void refresh_observation();
    int occupancy_at_step(std::int64_t k) const;

    const ou::WeatherTrace* base_;
    ou::EnvConfig cfg_;
    EnvOptions opt_;
    std::uint64_t seed_;
    int steps_per_episode_ = 0;

    std::array<std::mt19937_64, ou::kNumVars> noise_eng_;
    std::array<double, ou::kNumVars> noise_{};  // OU state per variable
    double t_in_ = 21.0;
    double rh_in_ = 50.0;
    double heat_sp_ = 20.0, cool_sp_ = 26.0;
    double last_power_ = 0.0;
    std::int64_t k_ = 0;  // substeps since reset
    bool started_ = false;
    bool warned_clamp_ = false;
    Observation obs_{};
};

}  // namespace uedhvac::bldg
