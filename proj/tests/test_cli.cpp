// Spawns the actual command-line binary (path in ARTIFACT_BIN) and checks the
// documented contract: exit codes, artifact files, and override precedence.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uedhvac/ou.hpp"

using namespace uedhvac;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* bin = std::getenv("ARTIFACT_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "ARTIFACT_BIN must point at the uedhvac binary");
    return bin;
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("uedhvac_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct CmdResult {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// env_prefix is prepended verbatim, e.g. "UEDHVAC_SEED=7 ".
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / "uedhvac_cli_io";
    fs::create_directories(dir);
    const fs::path out = dir / ("out" + std::to_string(counter));
    const fs::path err = dir / ("err" + std::to_string(counter));
    ++counter;

    const std::string cmd = env_prefix + "\"" + binary() + "\" " + args + " > \"" +
                            out.string() + "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// One-episode desk-scale run: big enough to exercise every artifact, small
// enough to keep this binary fast.
std::string write_tiny_config(const fs::path& dir, const std::string& strategy) {
    json j;
    j["strategy"] = strategy;
    j["seed"] = 11;
    j["total_steps"] = 1;
    j["norm_episodes"] = 1;
    j["hidden"] = {4};
    j["ppo"] = {{"horizon", 2048}, {"inner_steps", 2}};
    j["search"] = {
        {"n_iters", 2},
        {"bounds",
         {{"lo", std::vector<double>(ou::kOffsetLo.begin(), ou::kOffsetLo.end())},
          {"hi", std::vector<double>(ou::kOffsetHi.begin(), ou::kOffsetHi.end())}}}};
    const auto path = dir / "exp.json";
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    return path.string();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("train: identical configs give byte-identical metrics, flags beat env") {
    const auto dir = temp_dir("train");
    const auto cfg = write_tiny_config(dir, "dr");

    const auto a = run_cli("train -c " + cfg + " --seed 9 --out-dir " + (dir / "a").string());
    REQUIRE_MESSAGE(a.exit_code == 0, a.err);
    const auto b = run_cli("train -c " + cfg + " --seed 9 --out-dir " + (dir / "b").string());
    REQUIRE(b.exit_code == 0);
    const auto metrics_a = slurp(dir / "a" / "metrics.jsonl");
    CHECK(!metrics_a.empty());
    CHECK(metrics_a == slurp(dir / "b" / "metrics.jsonl"));
    CHECK(slurp(dir / "a" / "levels.jsonl") == slurp(dir / "b" / "levels.jsonl"));

    // the resolved config records every override, flags outranking env vars
    const auto c = run_cli("train -c " + cfg + " --total-steps 1 --out-dir " +
                               (dir / "c").string(),
                           "UEDHVAC_TOTAL_STEPS=5 UEDHVAC_SEED=123 ");
    REQUIRE_MESSAGE(c.exit_code == 0, c.err);
    const auto resolved = json::parse(slurp(dir / "c" / "config.json"));
    CHECK(resolved.at("total_steps") == 1);
    CHECK(resolved.at("seed") == 123);
    CHECK(resolved.at("strategy") == "dr");

    // a finished run's resolved config is itself a loadable config
    const auto d = run_cli("train -c " + (dir / "c" / "config.json").string());
    CHECK(d.exit_code == 0);
}

TEST_CASE("train: config errors exit 2 naming the key") {
    const auto dir = temp_dir("badcfg");

    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name);
        out << text;
        return (dir / name).string();
    };

    const auto unknown = run_cli(
        "train -c " +
        write("unknown.json",
              R"({"serch": {}, "search": {"bounds": {"lo": [0,0,0,0,0], "hi": [1,1,1,1,1]}}})"));
    CHECK(unknown.exit_code == 2);
    CHECK(unknown.err.find("unknown key \"serch\"") != std::string::npos);

    const auto missing = run_cli("train -c " + write("missing.json", R"({"strategy": "dr"})"));
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("search.bounds.lo") != std::string::npos);

    const auto invalid = run_cli(
        "train -c " +
        write("invalid.json",
              R"({"dropout": 1.5, "search": {"bounds": {"lo": [0,0,0,0,0], "hi": [1,1,1,1,1]}}})"));
    CHECK(invalid.exit_code == 2);
    CHECK(invalid.err.find("dropout") != std::string::npos);

    const auto absent = run_cli("train -c " + (dir / "nope.json").string());
    CHECK(absent.exit_code != 0);
}

TEST_CASE("eval: reports with the documented schema, sim2real on demand") {
    const auto dir = temp_dir("eval");
    const auto cfg = write_tiny_config(dir, "vanilla");
    REQUIRE(run_cli("train -c " + cfg + " --out-dir " + (dir / "run").string()).exit_code == 0);

    const auto ev = run_cli("eval --checkpoint " + (dir / "run").string() +
                            " --episodes 1 --seeds 1,2 --sim2real --out-dir " +
                            (dir / "ev").string());
    REQUIRE_MESSAGE(ev.exit_code == 0, ev.err);

    const auto report = slurp(dir / "ev" / "report.csv");
    CHECK(report.rfind("env,strategy,seed,reward,violation_days,energy_wh,mean_ppd\n", 0) == 0);
    CHECK(count_lines(report) == 3);  // header + one row per seed

    const auto long_csv = slurp(dir / "ev" / "long.csv");
    CHECK(long_csv.rfind("panel,metric,env,strategy,seed,value\n", 0) == 0);
    CHECK(count_lines(long_csv) == 1 + 3 * 2);  // three panels, two seeds

    const auto s2r = json::parse(slurp(dir / "ev" / "sim2real.json"));
    REQUIRE(s2r.at("rows").size() == 1);
    CHECK(s2r.at("rows")[0].at("hours_coarse") == 8760.0);
    CHECK(s2r.at("rows")[0].at("hours_fine") == 8760.0);

    // built-in policies need no checkpoint; a bad checkpoint path fails
    CHECK(run_cli("eval --policy rbc --seeds 1 --out-dir " + (dir / "rbc").string())
              .exit_code == 0);
    CHECK(run_cli("eval --checkpoint /absent.ckpt --out-dir " + dir.string()).exit_code != 0);
    const auto badenv = run_cli("eval --policy rbc --env venus --out-dir " + dir.string());
    CHECK(badenv.exit_code != 0);
    CHECK(badenv.err.find("venus") != std::string::npos);
}

TEST_CASE("report: re-aggregating eval rows reproduces the summary exactly") {
    const auto dir = temp_dir("report");
    const auto cfg = write_tiny_config(dir, "vanilla");
    REQUIRE(run_cli("train -c " + cfg + " --out-dir " + (dir / "run").string()).exit_code == 0);
    REQUIRE(run_cli("eval --checkpoint " + (dir / "run").string() +
                    " --seeds 4,5,6 --out-dir " + (dir / "ev").string())
                .exit_code == 0);

    const auto from_csv = run_cli("report -i " + (dir / "ev" / "report.csv").string() +
                                  " --out-dir " + (dir / "rep_csv").string());
    REQUIRE_MESSAGE(from_csv.exit_code == 0, from_csv.err);
    CHECK(slurp(dir / "rep_csv" / "summary.csv") == slurp(dir / "ev" / "summary.csv"));
    CHECK(slurp(dir / "rep_csv" / "long.csv") == slurp(dir / "ev" / "long.csv"));

    const auto from_json_cmd = run_cli("report -i " + (dir / "ev" / "report.json").string() +
                                       " --out-dir " + (dir / "rep_json").string());
    REQUIRE(from_json_cmd.exit_code == 0);
    CHECK(slurp(dir / "rep_json" / "summary.csv") == slurp(dir / "ev" / "summary.csv"));
}

TEST_CASE("fit-weather: five named variables out, nonzero exit on degenerate input") {
    const auto dir = temp_dir("fitw");

    // an OU stream around a flat base is exactly the fitted model's data
    ou::WeatherTrace base;
    base.rows.assign(ou::kHoursPerYear, {20.0, 50.0, 5.0, 180.0, 300.0});
    const auto noisy = ou::generate_noisy_trace(base, ou::EnvConfig{}, 99);
    ou::write_weather_csv(noisy, (dir / "city.csv").string());

    const auto fit = run_cli("fit-weather " + (dir / "city.csv").string() + " --ma-window 0");
    REQUIRE_MESSAGE(fit.exit_code == 0, fit.err);
    const auto j = json::parse(fit.out);
    REQUIRE(j.size() == 5);
    for (const char* name : ou::kVarNames) {
        REQUIRE_MESSAGE(j.contains(name), name);
        CHECK(j.at(name).at("sigma").get<double>() > 0.0);
        CHECK(j.at(name).at("tau").get<double>() > 0.0);
    }

    // --dt default is 1.0: saying it changes nothing
    const auto fit_dt = run_cli("fit-weather " + (dir / "city.csv").string() +
                                " --ma-window 0 --dt 1.0");
    CHECK(fit_dt.out == fit.out);

    // a directory input fits every csv, keyed by file stem
    fs::create_directories(dir / "cities");
    ou::write_weather_csv(noisy, (dir / "cities" / "alpha.csv").string());
    ou::write_weather_csv(noisy, (dir / "cities" / "beta.csv").string());
    const auto multi = run_cli("fit-weather " + (dir / "cities").string() +
                               " --ma-window 0 -o " + (dir / "fits.json").string());
    REQUIRE_MESSAGE(multi.exit_code == 0, multi.err);
    const auto mj = json::parse(slurp(dir / "fits.json"));
    REQUIRE(mj.contains("alpha"));
    REQUIRE(mj.contains("beta"));
    CHECK(mj.at("alpha").contains("temp_c"));

    {
        std::ofstream out(dir / "flat.csv");
        out << "temp_c,rh_pct,wind_ms,wind_deg,solar_w\n";
        for (int i = 0; i < 500; ++i) out << "1,2,3,4,5\n";
    }
    const auto flat = run_cli("fit-weather " + (dir / "flat.csv").string() + " --ma-window 0");
    CHECK(flat.exit_code != 0);
    CHECK(flat.err.find("temp_c") != std::string::npos);

    CHECK(run_cli("fit-weather " + (dir / "city.csv").string() + " --ma-window 1")
              .exit_code != 0);
}

TEST_CASE("ablate: one table row per value, unknown names and junk rejected") {
    const auto dir = temp_dir("ablate");
    const auto cfg = write_tiny_config(dir, "active_rl");

    const auto ab = run_cli("ablate --param eta --values 0.01,0.1 -c " + cfg +
                            " --episodes 1 --seeds 1 --out-dir " + (dir / "out").string());
    REQUIRE_MESSAGE(ab.exit_code == 0, ab.err);
    const auto table = slurp(dir / "out" / "ablate.csv");
    CHECK(table.rfind("param,value,seeds,suite_mean_reward,se_reward\n", 0) == 0);
    CHECK(count_lines(table) == 3);  // header + one row per value
    CHECK(table.find("eta,0.01,") != std::string::npos);
    CHECK(table.find("eta,0.1,") != std::string::npos);

    CHECK(run_cli("ablate --param rho --values 1 -c " + cfg).exit_code != 0);
    CHECK(run_cli("ablate --param eta --values 0.0x1 -c " + cfg).exit_code != 0);
    CHECK(run_cli("ablate --param eta -c " + cfg).exit_code != 0);  // --values required
}
