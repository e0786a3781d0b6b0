#include "uedhvac/bldg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "uedhvac/rng.hpp"

namespace uedhvac::bldg {

namespace {

constexpr int kMonthDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
constexpr int kYearLabel = 2001;  // non-leap, Jan 1 is a Monday

struct CalendarDate {
    int month;    // 1..12
    int day;      // 1..31
    int hour;     // 0..23
    int weekday;  // 0 = Monday
};

CalendarDate date_at(int hour_of_year) {
    int day_of_year = hour_of_year / 24;
    const int hour = hour_of_year % 24;
    int month = 0;
    while (day_of_year >= kMonthDays[month]) {
        day_of_year -= kMonthDays[month];
        ++month;
    }
    return {month + 1, day_of_year + 1, hour, (hour_of_year / 24) % 7};
}

}  // namespace

HvacDemand hvac_demand(double t_in, double heating_sp, double cooling_sp) {
    HvacDemand d;
    if (t_in < heating_sp)
        d.q_heat = std::min(kThermostatGain * (heating_sp - t_in), kQmax);
    else if (t_in > cooling_sp)
        d.q_cool = -std::min(kThermostatGain * (t_in - cooling_sp), kQmax);
    return d;
}

double electric_power(const HvacDemand& d) {
    return d.q_heat / kEtaHeat + std::abs(d.q_cool) / kCopCool;
}

double thermal_step(double t_in, double t_out, double q_hvac, double q_occ, double q_solar,
                    double dt_hours) {
    return t_in + (dt_hours * 3600.0 / kCth) *
                      ((t_out - t_in) / kRth + q_hvac + q_occ + q_solar);
}

double comfort_temp(double clo) {
    return 22.0 + 5.0 * (1.0 - clo);
}

double ppd_from_pmv(double pmv) {
    const double p2 = pmv * pmv;
    return 100.0 - 95.0 * std::exp(-0.03353 * p2 * p2 - 0.2179 * p2);
}

double compute_ppd(double t_in, double rh, double clo) {
    const double pmv = 0.3 * (t_in - comfort_temp(clo)) + 0.01 * (rh - 50.0);
    return ppd_from_pmv(pmv);
}

double clothing_for_month(int month) {
    return (month >= 4 && month <= 9) ? 0.5 : 1.0;
}

int occupancy_schedule(int month, int day, int hour) {
    int day_of_year = day - 1;
    for (int m = 0; m < month - 1; ++m) day_of_year += kMonthDays[m];
    const int weekday = day_of_year % 7;  // Jan 1 = Monday = 0
    if (weekday >= 5) return 0;
    return (hour >= 8 && hour <= 17) ? 10 : 0;
}

double compute_reward(double p_elec, double ppd, int occupancy, const RewardParams& params) {
    double r = -params.rho * params.lambda_e * p_elec;
    if (occupancy > 0 && ppd > params.ppd_threshold)
        r -= (1.0 - params.rho) * params.lambda_p * ppd;
    return r;
}

Action rbc_policy(const Observation& obs) {
    const int month = static_cast<int>(obs[kObsMonth]);
    if (obs[kObsOccupancy] <= 0.0) return {30.0, 15.0};
    if (month >= 6 && month <= 9) return {29.0, 22.5};  // summer band, heat end clipped
    return {23.5, 20.0};
}

Action random_policy(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> cool(kCoolLo, kCoolHi);
    std::uniform_real_distribution<double> heat(kHeatLo, kHeatHi);
    Action a;
    a.cooling_sp = cool(rng);
    a.heating_sp = heat(rng);
    return a;
}

BuildingEnv::BuildingEnv(const ou::WeatherTrace* base, const ou::EnvConfig& cfg,
                         const EnvOptions& opt, std::uint64_t seed)
    : base_(base), cfg_(cfg), opt_(opt), seed_(seed) {
    if (base_ == nullptr || base_->size() != ou::kHoursPerYear)
        throw std::invalid_argument("BuildingEnv: base trace must have 8760 rows");
    if (opt_.dt != 1.0 && opt_.dt != 0.5 && opt_.dt != 0.25)
        throw std::invalid_argument("BuildingEnv: dt must be one of {1.0, 0.5, 0.25}");
    for (int v = 0; v < ou::kNumVars; ++v) {
        const double mu = cfg_.vars[v].mu_offset;
        if (!(mu >= opt_.phi_lo[v] && mu <= opt_.phi_hi[v]))
            throw std::invalid_argument(std::string("BuildingEnv: phi out of bounds for ") +
                                        ou::kVarNames[v]);
    }
    steps_per_episode_ = static_cast<int>(std::lround(8760.0 / opt_.dt));
}

std::array<double, ou::kNumVars> BuildingEnv::weather_at(double hour_of_year) const {
    const int h0 = static_cast<int>(hour_of_year);
    const double frac = hour_of_year - h0;
    const int i0 = h0 % ou::kHoursPerYear;
    const int i1 = (i0 + 1) % ou::kHoursPerYear;
    std::array<double, ou::kNumVars> w{};
    for (int v = 0; v < ou::kNumVars; ++v) {
        const double base = base_->rows[i0][v] + frac * (base_->rows[i1][v] - base_->rows[i0][v]);
        w[v] = std::clamp(base + noise_[v], ou::kValueLo[v], ou::kValueHi[v]);
    }
    return w;
}

int BuildingEnv::occupancy_at_step(std::int64_t k) const {
    if (opt_.occupancy_override) return *opt_.occupancy_override;
    const int hour_of_year =
        static_cast<int>(static_cast<double>(k) * opt_.dt) % ou::kHoursPerYear;
    const CalendarDate d = date_at(hour_of_year);
    return occupancy_schedule(d.month, d.day, d.hour);
}

void BuildingEnv::refresh_observation() {
    const double hoy = std::fmod(static_cast<double>(k_) * opt_.dt,
                                 static_cast<double>(ou::kHoursPerYear));
    const auto w = weather_at(hoy);
    const CalendarDate d = date_at(static_cast<int>(hoy));
    const double clo = clothing_for_month(d.month);
    obs_[kObsOutTemp] = w[0];
    obs_[kObsOutRh] = w[1];
    obs_[kObsWind] = w[2];
    obs_[kObsWindDir] = w[3];
    obs_[kObsSolar] = w[4];
    obs_[kObsInTemp] = t_in_;
    obs_[kObsInRh] = rh_in_;
    obs_[kObsClo] = clo;
    obs_[kObsPpd] = compute_ppd(t_in_, rh_in_, clo);
    obs_[kObsHeatSp] = heat_sp_;
    obs_[kObsCoolSp] = cool_sp_;
    obs_[kObsDemand] = last_power_;
    obs_[kObsOccupancy] = static_cast<double>(occupancy_at_step(k_));
    obs_[kObsYear] = kYearLabel;
    obs_[kObsMonth] = d.month;
    obs_[kObsDay] = d.day;
    obs_[kObsHour] = d.hour;
}

Observation BuildingEnv::reset() {
    for (int v = 0; v < ou::kNumVars; ++v) {
        noise_eng_[v] = rng::engine(rng::derive(seed_, "ou-var", static_cast<std::uint64_t>(v)));
        noise_[v] = cfg_.vars[v].mu_offset;
    }
    t_in_ = 21.0;
    rh_in_ = 50.0;
    heat_sp_ = 20.0;
    cool_sp_ = 26.0;
    last_power_ = 0.0;
    k_ = 0;
    started_ = true;
    warned_clamp_ = false;
    refresh_observation();
    return obs_;
}

StepResult BuildingEnv::step(const Action& action) {
    if (!started_) throw std::logic_error("BuildingEnv: step before reset");

    Action a = action;
    a.cooling_sp = std::clamp(a.cooling_sp, kCoolLo, kCoolHi);
    a.heating_sp = std::clamp(a.heating_sp, kHeatLo, kHeatHi);
    if ((a.cooling_sp != action.cooling_sp || a.heating_sp != action.heating_sp) &&
        !warned_clamp_) {
        std::fprintf(stderr, "BuildingEnv: action outside bounds, clamped (cool %.3f heat %.3f)\n",
                     action.cooling_sp, action.heating_sp);
        warned_clamp_ = true;
    }
    heat_sp_ = a.heating_sp;
    cool_sp_ = a.cooling_sp;

    // Interval [k, k+1): zero-order hold on the interval-start weather.
    const double hoy = std::fmod(static_cast<double>(k_) * opt_.dt,
                                 static_cast<double>(ou::kHoursPerYear));
    const auto w = weather_at(hoy);
    const int occ_interval = occupancy_at_step(k_);

    const HvacDemand hv = hvac_demand(t_in_, heat_sp_, cool_sp_);
    last_power_ = electric_power(hv);
    const double q_occ = kQPerOccupant * occ_interval;
    const double q_solar = kSolarAperture * w[4];
    t_in_ = thermal_step(t_in_, w[0], hv.q_heat + hv.q_cool, q_occ, q_solar, opt_.dt);
    rh_in_ = std::clamp(rh_in_ + kRhRelaxPerHour * opt_.dt * (w[1] - rh_in_), 0.0, 100.0);

    // Advance the five independent OU streams by one dt.
    for (int v = 0; v < ou::kNumVars; ++v) {
        std::normal_distribution<double> normal(0.0, 1.0);
        noise_[v] = ou::ou_step(noise_[v], cfg_.vars[v], opt_.dt, normal(noise_eng_[v]));
    }
    ++k_;
    refresh_observation();

    StepResult res;
    res.obs = obs_;
    res.reward = compute_reward(last_power_, obs_[kObsPpd],
                                static_cast<int>(obs_[kObsOccupancy]), opt_.reward);
    res.done = k_ >= steps_per_episode_;
    return res;
}

}  // namespace uedhvac::bldg
