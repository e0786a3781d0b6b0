#include "uedhvac/ou.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "uedhvac/rng.hpp"

namespace uedhvac::ou {

namespace {

double clamp_var(int v, double x) {
    return std::clamp(x, kValueLo[v], kValueHi[v]);
}

// Shortest round-trip decimal form; keeps the CSV round-trip value-exact.
void append_double(std::string& out, double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    out.append(buf, res.ptr);
}

}  // namespace

double ou_step(double x, const OUParams& p, double dt, double z) {
    if (!std::isfinite(x) || !std::isfinite(z))
        throw std::domain_error("ou_step: non-finite input");
    if (!(dt > 0.0) || !(p.tau > 0.0) || !(p.sigma >= 0.0))
        throw std::invalid_argument("ou_step: dt and tau must be positive, sigma nonnegative");
    return x + dt * (-(x - p.mu_offset) / p.tau) + p.sigma * std::sqrt(2.0 / p.tau) * z;
}

WeatherTrace generate_noisy_trace(const WeatherTrace& base, const EnvConfig& cfg,
                                  std::uint64_t seed) {
    WeatherTrace out;
    out.rows.resize(base.rows.size());
    for (int v = 0; v < kNumVars; ++v) {
        auto eng = rng::engine(rng::derive(seed, "ou-var", static_cast<std::uint64_t>(v)));
        std::normal_distribution<double> normal(0.0, 1.0);
        double x = cfg.vars[v].mu_offset;
        for (std::size_t t = 0; t < base.rows.size(); ++t) {
            out.rows[t][v] = clamp_var(v, base.rows[t][v] + x);
            x = ou_step(x, cfg.vars[v], 1.0, normal(eng));
        }
    }
    return out;
}

OUParams fit_ou(std::span<const double> series, double dt) {
    const std::size_t n = series.size();
    if (n < 100) throw std::invalid_argument("fit_ou: series length must be >= 100");
    if (!(dt > 0.0)) throw std::invalid_argument("fit_ou: dt must be positive");

    const std::size_t m = n - 1;  // regression pairs (x_t, x_{t+1})
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        mean_x += series[t];
        mean_y += series[t + 1];
    }
    mean_x /= static_cast<double>(m);
    mean_y /= static_cast<double>(m);

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        const double dx = series[t] - mean_x;
        sxx += dx * dx;
        sxy += dx * (series[t + 1] - mean_y);
    }
    const double scale = std::max(1.0, mean_x * mean_x);
    if (sxx <= 1e-12 * static_cast<double>(m) * scale)
        throw FitError("fit_ou: constant series (zero regressor variance)");

    const double slope = sxy / sxx;
    const double intercept = mean_y - slope * mean_x;
    if (slope >= 1.0)
        throw FitError("fit_ou: non-mean-reverting series (slope >= 1)");

    const double tau = dt / (1.0 - slope);
    const double mu = intercept * tau / dt;

    double rss = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        const double e = series[t + 1] - slope * series[t] - intercept;
        rss += e * e;
    }
    // Unbiased: two estimated parameters.
    const double var_e = rss / static_cast<double>(m - 2);
    const double sigma = std::sqrt(std::max(0.0, var_e)) / std::sqrt(2.0 / tau);
    return OUParams{mu, sigma, tau};
}

std::vector<double> residualize(std::span<const double> raw, std::span<const double> base) {
    if (raw.size() != base.size())
        throw std::invalid_argument("residualize: length mismatch between raw and base series");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] - base[i];
    return out;
}

std::vector<double> residualize_ma(std::span<const double> raw, int window) {
    if (window < 2) throw std::invalid_argument("residualize_ma: window must be >= 2");
    const int n = static_cast<int>(raw.size());
    if (n < window) throw std::invalid_argument("residualize_ma: series shorter than window");
    const int lo = (window - 1) / 2;  // offsets [i-lo, i+hi] cover `window` points
    const int hi = window / 2;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n - window + 1));
    double acc = 0.0;
    for (int j = 0; j < window; ++j) acc += raw[j];
    for (int i = lo;; ++i) {
        out.push_back(raw[i] - acc / window);
        if (i + hi + 1 >= n) break;
        acc += raw[i + hi + 1] - raw[i - lo];
    }
    return out;
}

WeatherTrace load_weather_csv(const std::string& path, bool require_full_year) {
    std::ifstream in(path);
    if (!in) throw CsvError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw CsvError(path + ": empty file, expected header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::string expected_header = kVarNames[0];
    for (int v = 1; v < kNumVars; ++v) {
        expected_header += ',';
        expected_header += kVarNames[v];
    }
    if (line != expected_header)
        throw CsvError(path + ": bad header, expected '" + expected_header + "'");

    WeatherTrace trace;
    trace.rows.reserve(kHoursPerYear);
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::array<double, kNumVars> vals{};
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int col = 0; col < kNumVars; ++col) {
            const char* cell_end = std::find(p, end, ',');
            if (col < kNumVars - 1 && cell_end == end)
                throw CsvError(path + ": row " + std::to_string(row) + ": wrong column count");
            if (col == kNumVars - 1 && cell_end != end)
                throw CsvError(path + ": row " + std::to_string(row) + ": wrong column count");
            auto res = std::from_chars(p, cell_end, vals[col]);
            if (res.ec != std::errc{} || res.ptr != cell_end)
                throw CsvError(path + ": row " + std::to_string(row) + ": non-numeric value '" +
                               std::string(p, cell_end) + "' in column " + kVarNames[col]);
            if (!std::isfinite(vals[col]))
                throw CsvError(path + ": row " + std::to_string(row) + ": non-finite value in column " +
                               kVarNames[col]);
            p = cell_end == end ? end : cell_end + 1;
        }
        trace.rows.push_back(vals);
    }
    if (require_full_year && trace.size() != kHoursPerYear)
        throw CsvError(path + ": expected " + std::to_string(kHoursPerYear) + " rows, found " +
                       std::to_string(trace.size()));
    if (trace.size() == 0) throw CsvError(path + ": no data rows");
    return trace;
}

void write_weather_csv(const WeatherTrace& trace, const std::string& path) {
    std::string out;
    out.reserve(trace.rows.size() * 48 + 64);
    out += kVarNames[0];
    for (int v = 1; v < kNumVars; ++v) {
        out += ',';
        out += kVarNames[v];
    }
    out += '\n';
    for (const auto& row : trace.rows) {
        for (int v = 0; v < kNumVars; ++v) {
            if (v) out += ',';
            append_double(out, row[v]);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CsvError(path + ": cannot open for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CsvError(path + ": write failed");
}

WeatherTrace make_default_base_trace() {
    using std::numbers::pi;
    WeatherTrace trace;
    trace.rows.resize(kHoursPerYear);
    for (int t = 0; t < kHoursPerYear; ++t) {
        const int day = t / 24;
        const int hour = t % 24;
        const double d = static_cast<double>(day);
        const double h = static_cast<double>(hour);

        // Season phase: coldest mid-January, hottest mid-July.
        const double season = -std::cos(2.0 * pi * (d - 14.0) / 365.0);
        // Diurnal phase: warmest ~15:00, coldest ~03:00.
        const double diurnal = -std::cos(2.0 * pi * (h - 3.0) / 24.0);

        const double temp = 23.5 + 11.5 * season + 7.0 * diurnal;
        const double rh =
            std::clamp(46.0 - 0.9 * (temp - 23.5) - 6.0 * std::cos(2.0 * pi * (h - 5.0) / 24.0),
                       5.0, 95.0);
        const double wind =
            std::max(0.0, 2.8 + 1.1 * std::sin(2.0 * pi * (h - 13.0) / 24.0) +
                              0.7 * std::sin(2.0 * pi * d / 365.0 + 1.0));
        const double wind_dir = 190.0 + 70.0 * std::sin(2.0 * pi * d / 365.0) +
                                25.0 * std::sin(2.0 * pi * (h - 8.0) / 24.0);

        const double daylight_half = 5.0 + 1.4 * season;  // hours either side of noon
        const double sunrise = 12.0 - daylight_half;
        const double sunset = 12.0 + daylight_half;
        double solar = 0.0;
        if (h > sunrise && h < sunset) {
            const double peak = 700.0 + 250.0 * season;
            solar = peak * std::sin(pi * (h - sunrise) / (sunset - sunrise));
        }

        trace.rows[t] = {std::clamp(temp, kValueLo[0], kValueHi[0]),
                         std::clamp(rh, kValueLo[1], kValueHi[1]),
                         std::clamp(wind, kValueLo[2], kValueHi[2]),
                         std::clamp(wind_dir, kValueLo[3], kValueHi[3]),
                         std::clamp(solar, kValueLo[4], kValueHi[4])};
    }
    return trace;
}

}  // namespace uedhvac::ou
