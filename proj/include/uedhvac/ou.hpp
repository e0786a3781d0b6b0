// Ornstein-Uhlenbeck weather machinery: five-variable hourly traces, Euler
// noise stepping, regression-based parameter recovery, residualization, and
// the CSV interchange format.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uedhvac::ou {

inline constexpr int kNumVars = 5;
inline constexpr int kHoursPerYear = 8760;

inline constexpr std::array<const char*, kNumVars> kVarNames = {
    "temp_c", "rh_pct", "wind_ms", "wind_deg", "solar_w"};

// Physical bounds per variable; generated weather values are clamped into
// these ranges (wind direction clamped, not wrapped).
inline constexpr std::array<double, kNumVars> kValueLo = {-31.05, 3.0, 0.0, 0.0, 0.0};
inline constexpr std::array<double, kNumVars> kValueHi = {60.7, 100.0, 23.1, 360.0, 1033.0};

// Default hard bounds for the mean-offset vector phi: the symmetric span of
// the physical table, so the zero offset and the extreme evaluation scenarios
// are always admissible while offsets can still push any variable across its
// whole physical range. Overridable through SearchConfig / the config file.
inline constexpr std::array<double, kNumVars> kOffsetLo = {-91.75, -97.0, -23.1, -360.0, -1033.0};
inline constexpr std::array<double, kNumVars> kOffsetHi = {91.75, 97.0, 23.1, 360.0, 1033.0};

// Noise scale and reversion timescale used when nothing is fitted from data.
inline constexpr std::array<double, kNumVars> kDefaultSigma = {0.8, 4.0, 0.6, 25.0, 40.0};
inline constexpr std::array<double, kNumVars> kDefaultTau = {12.0, 8.0, 6.0, 4.0, 6.0};

struct OUParams {
    double mu_offset = 0.0;  // mean offset, native unit
    double sigma = 0.0;      // noise magnitude, native unit
    double tau = 1.0;        // mean-reversion timescale, hours
};

struct WeatherTrace {
    std::vector<std::array<double, kNumVars>> rows;  // exactly 8760 when full-year

    int size() const { return static_cast<int>(rows.size()); }
};

// One OU parameter set per weather variable. Default-constructed configs use
// the standard training noise at zero offset. phi() is the 5 mean offsets.
struct EnvConfig {
    std::array<OUParams, kNumVars> vars = [] {
        std::array<OUParams, kNumVars> v{};
        for (int i = 0; i < kNumVars; ++i) v[i] = {0.0, kDefaultSigma[i], kDefaultTau[i]};
        return v;
    }();

    std::array<double, kNumVars> phi() const {
        std::array<double, kNumVars> p{};
        for (int v = 0; v < kNumVars; ++v) p[v] = vars[v].mu_offset;
        return p;
    }
    void set_phi(const std::array<double, kNumVars>& p) {
        for (int v = 0; v < kNumVars; ++v) vars[v].mu_offset = p[v];
    }
};

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// x' = x + dt * (-(x - mu)/tau) + sigma * sqrt(2/tau) * z.
// Throws std::domain_error on non-finite x or z.
double ou_step(double x, const OUParams& p, double dt, double z);

// Adds an independent OU stream (x_0 = mu_offset) to each base column, clamps
// to the physical bounds. Variable v's stream is seeded derive(seed, "ou-var", v).
WeatherTrace generate_noisy_trace(const WeatherTrace& base, const EnvConfig& cfg,
                                  std::uint64_t seed);

// OLS fit of x_{t+1} = m*x_t + b, back-transformed: tau = dt/(1-m),
// mu = b*tau/dt, sigma = sqrt(Var(resid))/sqrt(2/tau) with the unbiased
// (n-2 dof) residual variance. Throws FitError on a constant series or m >= 1.
OUParams fit_ou(std::span<const double> series, double dt);

// raw - base, elementwise.
std::vector<double> residualize(std::span<const double> raw, std::span<const double> base);

// raw[i] - mean(raw[i-floor((w-1)/2) .. i+floor(w/2)]); only full windows are
// emitted, so the output has raw.size() - window + 1 entries.
std::vector<double> residualize_ma(std::span<const double> raw, int window = 24);

// require_full_year = false accepts any positive row count (fitting inputs
// need not span a year; simulation inputs must).
WeatherTrace load_weather_csv(const std::string& path, bool require_full_year = true);
void write_weather_csv(const WeatherTrace& trace, const std::string& path);

// Synthetic desert-climate typical year (hot summers, mild winters, strong
// diurnal swing, daylight-shaped solar). Pure function of nothing: the same
// trace every call, all values inside the physical bounds.
WeatherTrace make_default_base_trace();

}  // namespace uedhvac::ou
