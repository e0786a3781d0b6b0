#include "uedhvac/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "uedhvac/rng.hpp"

namespace uedhvac::harness {

namespace {

std::string fmt(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return {buf, res.ptr};
}

}  // namespace

std::vector<SuiteEntry> extreme_suite() {
    std::vector<SuiteEntry> suite;

    suite.push_back({"phi0", ou::EnvConfig{}});

    auto with_phi = [](std::array<double, ou::kNumVars> phi) {
        ou::EnvConfig cfg;
        cfg.set_phi(phi);
        return cfg;
    };
    suite.push_back({"hot_drought", with_phi({15.0, -30.0, 0.0, 0.0, 200.0})});
    suite.push_back({"wet_storm", with_phi({-2.0, 25.0, 8.0, 0.0, -150.0})});
    suite.push_back({"humid_heatwave", with_phi({10.0, 25.0, 0.0, 0.0, 100.0})});
    suite.push_back({"cold_snap", with_phi({-15.0, 0.0, 3.0, 0.0, -100.0})});

    ou::EnvConfig erratic;
    for (int v = 0; v < ou::kNumVars; ++v) erratic.vars[v].sigma = 3.0 * ou::kDefaultSigma[v];
    suite.push_back({"erratic", erratic});

    return suite;
}

bldg::Action RbcPolicy::act(const bldg::Observation& obs) { return bldg::rbc_policy(obs); }

bldg::Action RandomPolicy::act(const bldg::Observation&) { return bldg::random_policy(rng_); }

void RandomPolicy::reset_episode(std::uint64_t seed) { rng_ = rng::engine(seed); }

NetworkPolicy::NetworkPolicy(nn::Network actor, rl::ObsNormalizer norm)
    : actor_(std::move(actor)), norm_(std::move(norm)) {
    if (actor_.input_dim() != bldg::kObsDim || norm_.dim() != bldg::kObsDim)
        throw std::invalid_argument("network policy: observation dimension mismatch");
    if (actor_.output_dim() != 2 * rl::kActDim)
        throw std::invalid_argument("network policy: actor head has the wrong width");
}

NetworkPolicy NetworkPolicy::from_checkpoint(const std::string& path) {
    auto loaded = nn::load_network(path);
    if (!loaded.extra.contains("normalizer"))
        throw std::runtime_error("checkpoint carries no normalizer: " + path);
    rl::ObsNormalizer norm;
    norm.mean = loaded.extra.at("normalizer").at("mean").get<std::vector<double>>();
    norm.stdev = loaded.extra.at("normalizer").at("stdev").get<std::vector<double>>();
    return {std::move(loaded.net), std::move(norm)};
}

bldg::Action NetworkPolicy::act(const bldg::Observation& obs) {
    std::vector<double> nobs(obs.size());
    norm_.normalize({obs.data(), obs.size()}, nobs);
    const auto head = rl::decode_head(nn::forward(actor_, nobs));
    return rl::action_from_sample({head.mean, rl::kActDim});
}

int day_of_year(int month, int day) {
    static constexpr int kMonthDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12 || day < 1 || day > kMonthDays[month - 1])
        throw std::invalid_argument("bad calendar date");
    int d = day;
    for (int m = 0; m < month - 1; ++m) d += kMonthDays[m];
    return d;
}

int comfort_violation_days(const StepLog& log) {
    if (log.ppd.size() != log.occupancy.size() || log.ppd.size() != log.day.size())
        throw std::invalid_argument("step log arrays disagree");
    std::array<bool, 366> hit{};  // 1-based day index
    for (std::size_t t = 0; t < log.ppd.size(); ++t) {
        if (log.occupancy[t] > 0 && log.ppd[t] > 20.0) {
            const int d = log.day[t];
            if (d < 1 || d > 365) throw std::invalid_argument("day of year out of range");
            hit[static_cast<std::size_t>(d)] = true;
        }
    }
    int n = 0;
    for (int d = 1; d <= 365; ++d) n += hit[static_cast<std::size_t>(d)] ? 1 : 0;
    return n;
}

EpisodeMetrics run_episode(Policy& policy, const ou::WeatherTrace* base,
                           const ou::EnvConfig& cfg, const bldg::EnvOptions& opt,
                           std::uint64_t seed, int action_hold) {
    if (action_hold < 1) throw std::invalid_argument("action_hold must be >= 1");
    bldg::BuildingEnv env(base, cfg, opt, seed);
    bldg::Observation obs = env.reset();

    EpisodeMetrics m;
    StepLog log;
    const int n = env.steps_per_episode();
    log.ppd.reserve(static_cast<std::size_t>(n));

    double ppd_sum = 0.0;
    std::int64_t occupied = 0;
    bldg::Action action;
    for (int k = 0; k < n; ++k) {
        if (k % action_hold == 0) action = policy.act(obs);
        const auto res = env.step(action);
        obs = res.obs;

        m.reward += res.reward * opt.dt;
        m.energy_wh += obs[bldg::kObsDemand] * opt.dt;
        const int occ = static_cast<int>(obs[bldg::kObsOccupancy]);
        const double ppd = obs[bldg::kObsPpd];
        if (occ > 0) {
            ppd_sum += ppd;
            ++occupied;
        }
        log.ppd.push_back(ppd);
        log.occupancy.push_back(occ);
        log.day.push_back(day_of_year(static_cast<int>(obs[bldg::kObsMonth]),
                                      static_cast<int>(obs[bldg::kObsDay])));
    }
    m.violation_days = comfort_violation_days(log);
    m.mean_ppd = occupied > 0 ? ppd_sum / static_cast<double>(occupied) : 0.0;
    m.hours = static_cast<double>(n) * opt.dt;
    return m;
}

std::vector<EvalRow> evaluate(Policy& policy, const std::string& env_name,
                              const std::string& strategy_name, const ou::WeatherTrace* base,
                              const ou::EnvConfig& cfg, const bldg::EnvOptions& opt, int episodes,
                              std::span<const std::uint64_t> seeds) {
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("at least one seed required");

    std::vector<EvalRow> rows;
    rows.reserve(seeds.size());
    for (const std::uint64_t seed : seeds) {
        EvalRow row;
        row.env = env_name;
        row.strategy = strategy_name;
        row.seed = seed;
        for (int e = 0; e < episodes; ++e) {
            const auto ue = static_cast<std::uint64_t>(e);
            policy.reset_episode(rng::derive(seed, "policy", ue));
            const auto m = run_episode(policy, base, cfg, opt, rng::derive(seed, "eval-env", ue));
            row.reward += m.reward;
            row.violation_days += m.violation_days;
            row.energy_wh += m.energy_wh;
            row.mean_ppd += m.mean_ppd;
        }
        row.reward /= episodes;
        row.violation_days /= episodes;
        row.energy_wh /= episodes;
        row.mean_ppd /= episodes;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<EvalRow> evaluate_suite(Policy& policy, const std::string& strategy_name,
                                    const std::vector<SuiteEntry>& suite,
                                    const ou::WeatherTrace* base, const bldg::EnvOptions& opt,
                                    int episodes, std::span<const std::uint64_t> seeds) {
    std::vector<EvalRow> rows;
    for (const auto& entry : suite) {
        auto r = evaluate(policy, entry.name, strategy_name, base, entry.cfg, opt, episodes, seeds);
        rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                    std::make_move_iterator(r.end()));
    }
    return rows;
}

std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows) {
    std::vector<EvalSummary> out;
    for (const auto& row : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const EvalSummary& s) {
            return s.env == row.env && s.strategy == row.strategy;
        });
        if (it == out.end()) {
            out.push_back({row.env, row.strategy, 0, 0.0, 0.0, 0.0, 0.0, 0.0});
            it = std::prev(out.end());
        }
        ++it->seeds;
        it->mean_reward += row.reward;
        it->mean_violation_days += row.violation_days;
        it->mean_energy_wh += row.energy_wh;
        it->mean_ppd += row.mean_ppd;
    }
    for (auto& s : out) {
        s.mean_reward /= s.seeds;
        s.mean_violation_days /= s.seeds;
        s.mean_energy_wh /= s.seeds;
        s.mean_ppd /= s.seeds;
    }
    // second pass for the standard error of the reward
    for (auto& s : out) {
        if (s.seeds < 2) {
            s.se_reward = 0.0;
            continue;
        }
        double ss = 0.0;
        for (const auto& row : rows)
            if (row.env == s.env && row.strategy == s.strategy)
                ss += (row.reward - s.mean_reward) * (row.reward - s.mean_reward);
        s.se_reward = std::sqrt(ss / (s.seeds - 1)) / std::sqrt(static_cast<double>(s.seeds));
    }
    return out;
}

Sim2RealReport sim2real_eval(Policy& policy, const std::vector<SuiteEntry>& suite,
                             const ou::WeatherTrace* base, int hold, int episodes,
                             std::span<const std::uint64_t> seeds,
                             const bldg::RewardParams& reward) {
    if (hold != 1 && hold != 2 && hold != 4)
        throw std::invalid_argument("hold must be 1, 2, or 4");
    if (episodes < 1 || seeds.empty())
        throw std::invalid_argument("episodes and seeds must be nonempty");

    bldg::EnvOptions coarse;
    coarse.dt = 1.0;
    coarse.reward = reward;
    bldg::EnvOptions fine = coarse;
    fine.dt = 1.0 / hold;

    Sim2RealReport rep;
    for (const auto& entry : suite) {
        Sim2RealRow row;
        row.env = entry.name;
        double n = 0.0;
        for (const std::uint64_t seed : seeds) {
            for (int e = 0; e < episodes; ++e) {
                const auto ue = static_cast<std::uint64_t>(e);
                const auto env_seed = rng::derive(seed, "eval-env", ue);

                policy.reset_episode(rng::derive(seed, "policy", ue));
                const auto mc = run_episode(policy, base, entry.cfg, coarse, env_seed, 1);
                policy.reset_episode(rng::derive(seed, "policy", ue));
                const auto mf = run_episode(policy, base, entry.cfg, fine, env_seed, hold);

                row.reward_coarse += mc.reward;
                row.reward_fine += mf.reward;
                row.hours_coarse = mc.hours;
                row.hours_fine = mf.hours;
                n += 1.0;
            }
        }
        row.reward_coarse /= n;
        row.reward_fine /= n;
        row.drop = row.reward_coarse == 0.0
                       ? 0.0
                       : (row.reward_fine - row.reward_coarse) / std::abs(row.reward_coarse);
        rep.rows.push_back(std::move(row));
    }
    for (const auto& row : rep.rows) rep.mean_drop += row.drop;
    if (!rep.rows.empty()) rep.mean_drop /= static_cast<double>(rep.rows.size());
    return rep;
}

std::vector<AblationRow> ablation(const std::string& param, const std::vector<double>& values,
                                  const trainer::TrainerConfig& base_cfg,
                                  const ou::WeatherTrace* base,
                                  const std::vector<SuiteEntry>& suite, int episodes,
                                  std::span<const std::uint64_t> seeds) {
    if (param != "gamma" && param != "eta")
        throw std::invalid_argument("unknown ablation parameter: " + param);
    if (values.empty()) throw std::invalid_argument("ablation needs at least one value");

    std::vector<AblationRow> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        trainer::TrainerConfig cfg = base_cfg;
        cfg.strategy = trainer::Strategy::active_rl;
        if (param == "gamma")
            cfg.search.soft_weight = values[i];
        else
            cfg.search.step_size = values[i];
        cfg.out_dir = (std::filesystem::path(base_cfg.out_dir) /
                       (param + "-" + std::to_string(i)))
                          .string();
        const auto res = trainer::run_training(base, cfg);

        NetworkPolicy policy(res.ac.actor, res.norm);
        bldg::EnvOptions opt;
        opt.dt = cfg.dt;
        opt.reward = cfg.reward;
        const std::string label = "active_rl(" + param + "=" + fmt(values[i]) + ")";

        AblationRow row;
        row.value = values[i];
        row.rows = evaluate_suite(policy, label, suite, base, opt, episodes, seeds);
        row.summaries = summarize(row.rows);
        for (const auto& r : row.rows) row.suite_mean_reward += r.reward;
        row.suite_mean_reward /= static_cast<double>(row.rows.size());
        out.push_back(std::move(row));
    }
    return out;
}

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "env,strategy,seed,reward,violation_days,energy_wh,mean_ppd\n";
    for (const auto& r : rows)
        out << r.env << ',' << r.strategy << ',' << r.seed << ',' << fmt(r.reward) << ','
            << fmt(r.violation_days) << ',' << fmt(r.energy_wh) << ',' << fmt(r.mean_ppd) << '\n';
}

std::vector<EvalRow> read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);

    const auto parse_fail = [&](int line) {
        throw std::runtime_error(path + ": malformed row at line " + std::to_string(line));
    };
    const auto split = [](const std::string& line) {
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            f.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return f;
    };
    const auto to_double = [&](const std::string& s, int line) {
        double x = 0.0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
        if (ec != std::errc{} || end != s.data() + s.size()) parse_fail(line);
        return x;
    };

    std::string line;
    if (!std::getline(in, line) ||
        line != "env,strategy,seed,reward,violation_days,energy_wh,mean_ppd")
        throw std::runtime_error(path + ": unexpected header");

    std::vector<EvalRow> rows;
    for (int n = 2; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 7 || f[0].empty() || f[1].empty()) parse_fail(n);
        EvalRow r;
        r.env = f[0];
        r.strategy = f[1];
        std::uint64_t seed = 0;
        const auto [end, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), seed);
        if (ec != std::errc{} || end != f[2].data() + f[2].size()) parse_fail(n);
        r.seed = seed;
        r.reward = to_double(f[3], n);
        r.violation_days = to_double(f[4], n);
        r.energy_wh = to_double(f[5], n);
        r.mean_ppd = to_double(f[6], n);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_report_json(const std::string& path, const std::vector<EvalRow>& rows,
                       const std::vector<EvalSummary>& summaries) {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"env", r.env},
                             {"strategy", r.strategy},
                             {"seed", r.seed},
                             {"reward", r.reward},
                             {"violation_days", r.violation_days},
                             {"energy_wh", r.energy_wh},
                             {"mean_ppd", r.mean_ppd}});
    j["summary"] = nlohmann::ordered_json::array();
    for (const auto& s : summaries)
        j["summary"].push_back({{"env", s.env},
                                {"strategy", s.strategy},
                                {"seeds", s.seeds},
                                {"mean_reward", s.mean_reward},
                                {"se_reward", s.se_reward},
                                {"mean_violation_days", s.mean_violation_days},
                                {"mean_energy_wh", s.mean_energy_wh},
                                {"mean_ppd", s.mean_ppd}});
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_long_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "panel,metric,env,strategy,seed,value\n";
    for (const auto& r : rows) {
        out << "A,reward," << r.env << ',' << r.strategy << ',' << r.seed << ','
            << fmt(r.reward) << '\n';
        out << "B,violation_days," << r.env << ',' << r.strategy << ',' << r.seed << ','
            << fmt(r.violation_days) << '\n';
        out << "C,energy_wh," << r.env << ',' << r.strategy << ',' << r.seed << ','
            << fmt(r.energy_wh) << '\n';
    }
}

}  // namespace uedhvac::harness
