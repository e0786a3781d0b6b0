// Command-line driver: train / eval / fit-weather / ablate / report.
//
// Experiment settings come from a JSON config file (see config.hpp for the
// precedence rules); every flag here maps onto a config key of the same name.
// Exit codes: 0 success, 2 configuration or validation error, 1 anything else.
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "uedhvac/config.hpp"
#include "uedhvac/harness.hpp"
#include "uedhvac/ou.hpp"
#include "uedhvac/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace uedhvac;

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

std::string fmt(double x) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc{} ? std::string(buf, end) : "nan";
}

void set_workers(int workers) {
#ifdef _OPENMP
    omp_set_num_threads(std::max(1, workers));
#else
    (void)workers;
#endif
}

// Flag values forwarded into the config tree so flags, environment variables,
// and file keys resolve through one code path.
struct TrainOverrides {
    std::optional<std::string> strategy;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> total_steps;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
    std::optional<int> snapshot_every;

    void apply(json& j) const {
        if (strategy) j["strategy"] = *strategy;
        if (seed) j["seed"] = *seed;
        if (total_steps) j["total_steps"] = *total_steps;
        if (out_dir) j["out_dir"] = *out_dir;
        if (workers) j["workers"] = *workers;
        if (snapshot_every) j["snapshot_every"] = *snapshot_every;
    }
};

config::ExperimentConfig load_experiment(const std::string& path, const TrainOverrides& ov) {
    std::ifstream in(path);
    if (!in) throw config::ConfigError("config: cannot read config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw config::ConfigError(std::string("config: parse error in ") + path + ": " + e.what());
    }
    config::apply_env_overrides(j, config::env_overrides());
    ov.apply(j);
    config::ExperimentConfig cfg = config::from_json(j);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw config::ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

void write_resolved_config(const config::ExperimentConfig& cfg) {
    const fs::path dir = cfg.train.out_dir;
    fs::create_directories(dir);
    std::ofstream out(dir / "config.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / "config.json").string());
    out << config::to_json(cfg).dump(2) << '\n';
}

int cmd_train(const std::string& config_path, const TrainOverrides& ov) {
    const auto cfg = load_experiment(config_path, ov);
    set_workers(cfg.workers);
    write_resolved_config(cfg);

    const auto base = ou::make_default_base_trace();
    const auto result = trainer::run_training(&base, cfg.train);
    std::printf("trained %s: %lld episodes, %lld env steps, final mean reward %s\n",
                trainer::to_string(cfg.train.strategy),
                static_cast<long long>(result.episodes), static_cast<long long>(result.steps),
                fmt(result.final_mean_reward).c_str());
    std::printf("artifacts in %s: metrics.jsonl levels.jsonl state.json actor.ckpt critic.ckpt\n",
                cfg.train.out_dir.c_str());
    return 0;
}

std::vector<harness::SuiteEntry> pick_suite(bool full_suite, const std::string& env_name) {
    auto suite = harness::extreme_suite();
    if (full_suite) return suite;
    for (auto& e : suite)
        if (e.name == env_name) return {e};
    std::string names;
    for (const auto& e : suite) names += " " + e.name;
    throw std::invalid_argument("unknown environment \"" + env_name + "\"; known:" + names);
}

void write_summary_csv(const std::string& path, const std::vector<harness::EvalSummary>& sums) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "env,strategy,seeds,mean_reward,se_reward,mean_violation_days,mean_energy_wh,mean_ppd\n";
    for (const auto& s : sums)
        out << s.env << ',' << s.strategy << ',' << s.seeds << ',' << fmt(s.mean_reward) << ','
            << fmt(s.se_reward) << ',' << fmt(s.mean_violation_days) << ','
            << fmt(s.mean_energy_wh) << ',' << fmt(s.mean_ppd) << '\n';
}

void write_sim2real(const fs::path& dir, const harness::Sim2RealReport& rep) {
    std::ofstream csv(dir / "sim2real.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "sim2real.csv").string());
    csv << "env,reward_coarse,reward_fine,drop,hours_coarse,hours_fine\n";
    for (const auto& r : rep.rows)
        csv << r.env << ',' << fmt(r.reward_coarse) << ',' << fmt(r.reward_fine) << ','
            << fmt(r.drop) << ',' << fmt(r.hours_coarse) << ',' << fmt(r.hours_fine) << '\n';

    ordered_json j;
    j["rows"] = ordered_json::array();
    for (const auto& r : rep.rows)
        j["rows"].push_back({{"env", r.env},
                             {"reward_coarse", r.reward_coarse},
                             {"reward_fine", r.reward_fine},
                             {"drop", r.drop},
                             {"hours_coarse", r.hours_coarse},
                             {"hours_fine", r.hours_fine}});
    j["mean_drop"] = rep.mean_drop;
    std::ofstream js(dir / "sim2real.json", std::ios::trunc);
    if (!js) throw std::runtime_error("cannot write " + (dir / "sim2real.json").string());
    js << j.dump(2) << '\n';
}

struct EvalArgs {
    std::string checkpoint;
    std::string policy = "checkpoint";  // checkpoint | rbc | random
    bool full_suite = false;
    std::string env_name = "phi0";
    int episodes = 1;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    bool sim2real = false;
    int hold = 4;
    std::string label;
    std::string out_dir = ".";
    int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
    set_workers(a.workers);

    std::unique_ptr<harness::Policy> policy;
    std::string label = a.label;
    if (a.policy == "checkpoint") {
        fs::path ckpt = a.checkpoint;
        if (fs::is_directory(ckpt)) ckpt /= "actor.ckpt";
        policy = std::make_unique<harness::NetworkPolicy>(
            harness::NetworkPolicy::from_checkpoint(ckpt.string()));
        if (label.empty()) label = "net";
    } else if (a.policy == "rbc") {
        policy = std::make_unique<harness::RbcPolicy>();
        if (label.empty()) label = "rbc";
    } else if (a.policy == "random") {
        policy = std::make_unique<harness::RandomPolicy>();
        if (label.empty()) label = "random";
    } else {
        throw std::invalid_argument("unknown policy \"" + a.policy +
                                    "\"; known: checkpoint rbc random");
    }

    const auto suite = pick_suite(a.full_suite, a.env_name);
    const auto base = ou::make_default_base_trace();
    const bldg::EnvOptions opt;

    const auto rows =
        harness::evaluate_suite(*policy, label, suite, &base, opt, a.episodes, a.seeds);
    const auto sums = harness::summarize(rows);

    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    harness::write_report_csv((dir / "report.csv").string(), rows);
    harness::write_report_json((dir / "report.json").string(), rows, sums);
    harness::write_long_csv((dir / "long.csv").string(), rows);
    write_summary_csv((dir / "summary.csv").string(), sums);

    if (a.sim2real) {
        const auto rep = harness::sim2real_eval(*policy, suite, &base, a.hold, a.episodes,
                                                a.seeds, opt.reward);
        write_sim2real(dir, rep);
        std::printf("sim2real mean drop %s over %zu environments (hold %d)\n",
                    fmt(rep.mean_drop).c_str(), rep.rows.size(), a.hold);
    }
    for (const auto& s : sums)
        std::printf("%s %s: mean reward %s (SE %s, %d seeds)\n", s.env.c_str(),
                    s.strategy.c_str(), fmt(s.mean_reward).c_str(), fmt(s.se_reward).c_str(),
                    s.seeds);
    std::printf("reports in %s: report.csv report.json summary.csv long.csv%s\n",
                dir.string().c_str(), a.sim2real ? " sim2real.csv sim2real.json" : "");
    return 0;
}

ordered_json fit_one_file(const std::string& path, double dt, int ma_window) {
    const auto trace = ou::load_weather_csv(path, /*require_full_year=*/false);
    ordered_json out;
    for (int v = 0; v < ou::kNumVars; ++v) {
        std::vector<double> series(trace.rows.size());
        for (std::size_t i = 0; i < trace.rows.size(); ++i) series[i] = trace.rows[i][v];
        const auto fitted = ma_window == 0 ? series : ou::residualize_ma(series, ma_window);
        try {
            const auto p = ou::fit_ou(fitted, dt);
            out[ou::kVarNames[v]] = {
                {"mu_offset", p.mu_offset}, {"sigma", p.sigma}, {"tau", p.tau}};
        } catch (const ou::FitError& e) {
            throw ou::FitError(path + ", column " + ou::kVarNames[v] + ": " + e.what());
        }
    }
    return out;
}

int cmd_fit_weather(const std::string& path, double dt, int ma_window,
                    const std::string& out_path) {
    if (ma_window < 0 || ma_window == 1)
        throw std::invalid_argument("--ma-window must be 0 (no detrend) or >= 2");

    ordered_json result;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        if (files.empty())
            throw std::invalid_argument(path + ": directory holds no .csv files");
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            result[f.stem().string()] = fit_one_file(f.string(), dt, ma_window);
    } else {
        result = fit_one_file(path, dt, ma_window);
    }

    const std::string text = result.dump(2) + "\n";
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << text;
    }
    return 0;
}

struct AblateArgs {
    std::string param;
    std::vector<double> values;
    std::string config_path;
    int episodes = 1;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir;
};

int cmd_ablate(const AblateArgs& a) {
    TrainOverrides ov;
    if (!a.out_dir.empty()) ov.out_dir = a.out_dir;
    const auto cfg = load_experiment(a.config_path, ov);
    set_workers(cfg.workers);

    const auto base = ou::make_default_base_trace();
    const auto suite = harness::extreme_suite();
    const auto table =
        harness::ablation(a.param, a.values, cfg.train, &base, suite, a.episodes, a.seeds);

    const fs::path dir = cfg.train.out_dir;
    fs::create_directories(dir);

    // One row per swept value; the SE is over per-seed suite means.
    std::ofstream csv(dir / "ablate.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + (dir / "ablate.csv").string());
    csv << "param,value,seeds,suite_mean_reward,se_reward\n";
    ordered_json j;
    j["param"] = a.param;
    j["rows"] = ordered_json::array();
    for (const auto& row : table) {
        std::map<std::uint64_t, std::pair<double, int>> by_seed;
        for (const auto& r : row.rows) {
            by_seed[r.seed].first += r.reward;
            by_seed[r.seed].second += 1;
        }
        std::vector<double> seed_means;
        for (const auto& [seed, acc] : by_seed) seed_means.push_back(acc.first / acc.second);
        double se = 0.0;
        if (seed_means.size() > 1) {
            double m = 0.0;
            for (double x : seed_means) m += x;
            m /= static_cast<double>(seed_means.size());
            double ss = 0.0;
            for (double x : seed_means) ss += (x - m) * (x - m);
            se = std::sqrt(ss / static_cast<double>(seed_means.size() - 1)) /
                 std::sqrt(static_cast<double>(seed_means.size()));
        }
        csv << a.param << ',' << fmt(row.value) << ',' << seed_means.size() << ','
            << fmt(row.suite_mean_reward) << ',' << fmt(se) << '\n';

        ordered_json detail;
        detail["value"] = row.value;
        detail["seeds"] = seed_means.size();
        detail["suite_mean_reward"] = row.suite_mean_reward;
        detail["se_reward"] = se;
        detail["per_env"] = ordered_json::array();
        for (const auto& s : row.summaries)
            detail["per_env"].push_back({{"env", s.env},
                                         {"mean_reward", s.mean_reward},
                                         {"se_reward", s.se_reward},
                                         {"seeds", s.seeds}});
        j["rows"].push_back(std::move(detail));
        std::printf("%s=%s: suite mean reward %s (SE %s)\n", a.param.c_str(),
                    fmt(row.value).c_str(), fmt(row.suite_mean_reward).c_str(),
                    fmt(se).c_str());
    }
    std::ofstream js(dir / "ablate.json", std::ios::trunc);
    if (!js) throw std::runtime_error("cannot write " + (dir / "ablate.json").string());
    js << j.dump(2) << '\n';
    std::printf("ablation table in %s: ablate.csv ablate.json\n", dir.string().c_str());
    return 0;
}

std::vector<harness::EvalRow> read_rows_any(const std::string& path) {
    if (fs::path(path).extension() == ".json") {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        const json j = json::parse(in);
        if (!j.contains("rows") || !j.at("rows").is_array())
            throw std::runtime_error(path + ": no \"rows\" array");
        std::vector<harness::EvalRow> rows;
        for (const auto& e : j.at("rows")) {
            harness::EvalRow r;
            r.env = e.at("env").get<std::string>();
            r.strategy = e.at("strategy").get<std::string>();
            r.seed = e.at("seed").get<std::uint64_t>();
            r.reward = e.at("reward").get<double>();
            r.violation_days = e.at("violation_days").get<double>();
            r.energy_wh = e.at("energy_wh").get<double>();
            r.mean_ppd = e.at("mean_ppd").get<double>();
            rows.push_back(std::move(r));
        }
        return rows;
    }
    return harness::read_report_csv(path);
}

int cmd_report(const std::string& input, const std::string& out_dir) {
    const auto rows = read_rows_any(input);
    if (rows.empty()) throw std::runtime_error(input + ": no rows to report");
    const auto sums = harness::summarize(rows);

    const fs::path dir = out_dir;
    fs::create_directories(dir);
    harness::write_report_json((dir / "report.json").string(), rows, sums);
    write_summary_csv((dir / "summary.csv").string(), sums);
    harness::write_long_csv((dir / "long.csv").string(), rows);
    std::printf("%zu rows, %zu (env, strategy) groups; wrote report.json summary.csv long.csv in %s\n",
                rows.size(), sums.size(), dir.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UED training and evaluation for the surrogate HVAC building"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a strategy from a JSON config");
    std::string train_config;
    TrainOverrides ov;
    train->add_option("-c,--config", train_config, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--strategy", ov.strategy,
                      "override: vanilla|dr|plr|rplr|active_rl|active_plr");
    train->add_option("--seed", ov.seed, "override: master seed");
    train->add_option("--total-steps", ov.total_steps, "override: env step budget");
    train->add_option("--out-dir", ov.out_dir, "override: artifact directory");
    train->add_option("--workers", ov.workers, "override: worker count (1 = serial kernels)");
    train->add_option("--snapshot-every", ov.snapshot_every, "override: episodes per snapshot");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a policy and write reports");
    EvalArgs ea;
    eval->add_option("--checkpoint", ea.checkpoint,
                     "actor.ckpt file or a training output directory");
    eval->add_option("--policy", ea.policy, "checkpoint|rbc|random")
        ->check(CLI::IsMember({"checkpoint", "rbc", "random"}));
    eval->add_flag("--suite", ea.full_suite, "evaluate the whole six-environment suite");
    eval->add_option("--env", ea.env_name, "single environment name (default phi0)");
    eval->add_option("--episodes", ea.episodes, "episodes per seed")
        ->check(CLI::PositiveNumber);
    eval->add_option("--seeds", ea.seeds, "evaluation seeds")->delimiter(',');
    eval->add_flag("--sim2real", ea.sim2real,
                   "also compare hourly control against the refined-step simulation");
    eval->add_option("--hold", ea.hold, "substeps per held action (fine dt = 1/hold)")
        ->check(CLI::IsMember({1, 2, 4}));
    eval->add_option("--label", ea.label, "strategy column label in reports");
    eval->add_option("--out-dir", ea.out_dir, "report directory");
    eval->add_option("--workers", ea.workers, "worker count");

    // fit-weather
    auto* fitw = app.add_subcommand("fit-weather",
                                    "Fit noise parameters from hourly weather CSVs");
    std::string fit_path, fit_out;
    double fit_dt = 1.0;
    int fit_ma = 24;
    fitw->add_option("path", fit_path, "weather CSV file or a directory of them")
        ->required()
        ->check(CLI::ExistingPath);
    fitw->add_option("--dt", fit_dt, "sample spacing in hours (default 1.0)")
        ->check(CLI::PositiveNumber);
    fitw->add_option("--ma-window", fit_ma,
                     "moving-average detrend window, 0 disables (default 24)");
    fitw->add_option("-o,--out", fit_out, "write JSON here instead of stdout");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Sweep a search hyperparameter");
    AblateArgs aa;
    ablate->add_option("--param", aa.param, "gamma (distance weight) or eta (step size)")
        ->required()
        ->check(CLI::IsMember({"gamma", "eta"}));
    ablate->add_option("--values", aa.values, "comma-separated decimal values")
        ->required()
        ->delimiter(',');
    ablate->add_option("-c,--config", aa.config_path, "base experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--episodes", aa.episodes, "episodes per seed")
        ->check(CLI::PositiveNumber);
    ablate->add_option("--seeds", aa.seeds, "evaluation seeds")->delimiter(',');
    ablate->add_option("--out-dir", aa.out_dir, "override: artifact directory");

    // report
    auto* report = app.add_subcommand("report", "Aggregate raw rows into summary and plot data");
    std::string rep_input, rep_out = ".";
    report->add_option("-i,--input", rep_input, "report.csv or report.json from eval")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--out-dir", rep_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(train_config, ov);
        if (*eval) return cmd_eval(ea);
        if (*fitw) return cmd_fit_weather(fit_path, fit_dt, fit_ma, fit_out);
        if (*ablate) return cmd_ablate(aa);
        if (*report) return cmd_report(rep_input, rep_out);
    } catch (const config::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
