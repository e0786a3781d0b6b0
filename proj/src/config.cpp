#include "uedhvac/config.hpp"

#include <cctype>
#include <cstddef>
#include <fstream>

#include "uedhvac/ou.hpp"

extern char** environ;

namespace uedhvac::config {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

json phi_to_json(const ued::Phi& p) { return json(std::vector<double>(p.begin(), p.end())); }

ued::Phi phi_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(ou::kNumVars))
        fail("key \"" + path + "\" must be an array of " + std::to_string(ou::kNumVars) +
             " numbers");
    ued::Phi p{};
    for (int v = 0; v < ou::kNumVars; ++v) {
        if (!j[v].is_number()) fail("key \"" + path + "\" must be an array of numbers");
        p[v] = j[v].get<double>();
    }
    return p;
}

// Walks the user tree against the schema tree: every key must exist in the
// schema with a compatible type. Integer slots reject fractional values;
// float slots accept integers.
void check_against_schema(const json& user, const ordered_json& schema,
                          const std::string& prefix) {
    for (const auto& [key, val] : user.items()) {
        const std::string path = join(prefix, key);
        if (!schema.contains(key)) fail("unknown key \"" + path + "\"");
        const auto& ref = schema.at(key);
        if (ref.is_object()) {
            if (!val.is_object()) fail("key \"" + path + "\" must be an object");
            check_against_schema(val, ref, path);
        } else if (ref.is_array()) {
            if (!val.is_array()) fail("key \"" + path + "\" must be an array");
            const bool want_int = !ref.empty() && ref.front().is_number_integer();
            for (const auto& el : val) {
                if (!el.is_number()) fail("key \"" + path + "\" must hold numbers");
                if (want_int && !el.is_number_integer() && !el.is_number_unsigned())
                    fail("key \"" + path + "\" must hold integers");
            }
        } else if (ref.is_boolean()) {
            if (!val.is_boolean()) fail("key \"" + path + "\" must be true or false");
        } else if (ref.is_string()) {
            if (!val.is_string()) fail("key \"" + path + "\" must be a string");
        } else if (ref.is_number_integer() || ref.is_number_unsigned()) {
            if (!val.is_number_integer() && !val.is_number_unsigned())
                fail("key \"" + path + "\" must be an integer");
            if (ref.is_number_unsigned() && val.is_number_integer() &&
                val.get<std::int64_t>() < 0)
                fail("key \"" + path + "\" must be >= 0");
        } else {  // float slot
            if (!val.is_number()) fail("key \"" + path + "\" must be a number");
        }
    }
}

void merge_over(ordered_json& base, const json& user) {
    for (const auto& [key, val] : user.items()) {
        if (val.is_object() && base.at(key).is_object())
            merge_over(base.at(key), val);
        else
            base[key] = val;
    }
}

void require_key(const json& j, std::initializer_list<const char*> steps,
                 const std::string& full) {
    const json* cur = &j;
    for (const char* step : steps) {
        if (!cur->is_object() || !cur->contains(step))
            fail("missing required key \"" + full +
                 "\": the offset bounds must be stated explicitly");
        cur = &cur->at(step);
    }
}

bool parses_as_json(const std::string& text, json& out) {
    out = json::parse(text, nullptr, false);
    return !out.is_discarded();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (train.dt != 1.0 && train.dt != 0.5 && train.dt != 0.25)
        throw std::invalid_argument("dt must be 1.0, 0.5, or 0.25");
    const auto& rw = train.reward;
    if (!(rw.rho >= 0.0 && rw.rho <= 1.0))
        throw std::invalid_argument("reward.rho must be in [0, 1]");
    if (!(rw.lambda_e >= 0.0) || !(rw.lambda_p >= 0.0))
        throw std::invalid_argument("reward.lambda_e and reward.lambda_p must be >= 0");
    if (!(rw.ppd_threshold > 0.0))
        throw std::invalid_argument("reward.ppd_threshold must be > 0");
    train.validate();
    train.replay.validate();
    train.search.validate();
}

ordered_json to_json(const ExperimentConfig& cfg) {
    const auto& t = cfg.train;
    ordered_json j;
    j["strategy"] = trainer::to_string(t.strategy);
    j["seed"] = t.seed;
    j["total_steps"] = t.total_steps;
    j["snapshot_every"] = t.snapshot_every;
    j["norm_episodes"] = t.norm_episodes;
    j["hidden"] = t.hidden;
    j["dropout"] = t.dropout;
    j["dt"] = t.dt;
    j["out_dir"] = t.out_dir;
    j["workers"] = cfg.workers;
    j["ppo"] = {{"lr", t.ppo.lr},
                {"clip", t.ppo.clip},
                {"discount", t.ppo.discount},
                {"gae_lambda", t.ppo.gae_lambda},
                {"inner_steps", t.ppo.inner_steps},
                {"value_coef", t.ppo.value_coef},
                {"entropy_coef", t.ppo.entropy_coef},
                {"horizon", t.ppo.horizon}};
    j["replay"] = {{"rho_staleness", t.replay.rho_staleness},
                   {"beta_temperature", t.replay.beta_temperature},
                   {"n_plr", t.replay.n_plr}};
    j["search"] = {{"n_iters", t.search.n_iters},
                   {"step_size", t.search.step_size},
                   {"soft_weight", t.search.soft_weight},
                   {"mc_passes", t.search.mc_passes},
                   {"dropout", t.search.dropout},
                   {"squared_distance", t.search.squared_distance},
                   {"bounds", {{"lo", phi_to_json(t.search.lo)}, {"hi", phi_to_json(t.search.hi)}}}};
    j["reward"] = {{"rho", t.reward.rho},
                   {"lambda_e", t.reward.lambda_e},
                   {"lambda_p", t.reward.lambda_p},
                   {"ppd_threshold", t.reward.ppd_threshold}};
    return j;
}

ExperimentConfig from_json(const json& j) {
    if (!j.is_object()) fail("root must be an object");

    auto strategy = trainer::Strategy::vanilla;
    if (auto it = j.find("strategy"); it != j.end()) {
        if (!it->is_string()) fail("key \"strategy\" must be a string");
        try {
            strategy = trainer::strategy_from_string(it->get<std::string>());
        } catch (const std::invalid_argument& e) {
            fail(std::string("key \"strategy\": ") + e.what());
        }
    }

    ExperimentConfig out;
    out.train = trainer::default_config(strategy);
    ordered_json merged = to_json(out);
    check_against_schema(j, merged, "");
    require_key(j, {"search", "bounds", "lo"}, "search.bounds.lo");
    require_key(j, {"search", "bounds", "hi"}, "search.bounds.hi");
    merge_over(merged, j);

    auto& t = out.train;
    t.strategy = strategy;
    t.seed = merged.at("seed").get<std::uint64_t>();
    t.total_steps = merged.at("total_steps").get<std::int64_t>();
    t.snapshot_every = merged.at("snapshot_every").get<int>();
    t.norm_episodes = merged.at("norm_episodes").get<int>();
    t.hidden = merged.at("hidden").get<std::vector<int>>();
    t.dropout = merged.at("dropout").get<double>();
    t.dt = merged.at("dt").get<double>();
    t.out_dir = merged.at("out_dir").get<std::string>();
    out.workers = merged.at("workers").get<int>();

    const auto& p = merged.at("ppo");
    t.ppo.lr = p.at("lr").get<double>();
    t.ppo.clip = p.at("clip").get<double>();
    t.ppo.discount = p.at("discount").get<double>();
    t.ppo.gae_lambda = p.at("gae_lambda").get<double>();
    t.ppo.inner_steps = p.at("inner_steps").get<int>();
    t.ppo.value_coef = p.at("value_coef").get<double>();
    t.ppo.entropy_coef = p.at("entropy_coef").get<double>();
    t.ppo.horizon = p.at("horizon").get<int>();

    const auto& r = merged.at("replay");
    t.replay.rho_staleness = r.at("rho_staleness").get<double>();
    t.replay.beta_temperature = r.at("beta_temperature").get<double>();
    t.replay.n_plr = r.at("n_plr").get<int>();

    const auto& s = merged.at("search");
    t.search.n_iters = s.at("n_iters").get<int>();
    t.search.step_size = s.at("step_size").get<double>();
    t.search.soft_weight = s.at("soft_weight").get<double>();
    t.search.mc_passes = s.at("mc_passes").get<int>();
    t.search.dropout = s.at("dropout").get<double>();
    t.search.squared_distance = s.at("squared_distance").get<bool>();
    t.search.lo = phi_from_json(s.at("bounds").at("lo"), "search.bounds.lo");
    t.search.hi = phi_from_json(s.at("bounds").at("hi"), "search.bounds.hi");

    const auto& w = merged.at("reward");
    t.reward.rho = w.at("rho").get<double>();
    t.reward.lambda_e = w.at("lambda_e").get<double>();
    t.reward.lambda_p = w.at("lambda_p").get<double>();
    t.reward.ppd_threshold = w.at("ppd_threshold").get<double>();

    t.exec = out.workers == 1 ? kernels::Exec::serial : kernels::Exec::parallel;
    return out;
}

std::vector<std::pair<std::string, std::string>> env_overrides() {
    std::vector<std::pair<std::string, std::string>> out;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        const std::string entry = *e;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string name = entry.substr(0, eq);
        if (name.rfind("UEDHVAC_", 0) == 0)
            out.emplace_back(std::move(name), entry.substr(eq + 1));
    }
    return out;
}

void apply_env_overrides(json& j,
                         const std::vector<std::pair<std::string, std::string>>& env) {
    for (const auto& [name, value] : env) {
        if (name.rfind("UEDHVAC_", 0) != 0) continue;
        std::string rest = name.substr(8);
        if (rest.empty()) fail("environment variable \"" + name + "\" names no key");
        for (char& c : rest) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

        std::vector<std::string> path;
        std::size_t pos = 0;
        while (true) {
            const auto sep = rest.find("__", pos);
            path.push_back(rest.substr(pos, sep - pos));
            if (sep == std::string::npos) break;
            pos = sep + 2;
        }
        for (const auto& step : path)
            if (step.empty()) fail("environment variable \"" + name + "\" names no key");

        json parsed;
        if (!parses_as_json(value, parsed)) parsed = value;

        json* cur = &j;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            json& next = (*cur)[path[i]];
            if (!next.is_object() && !next.is_null())
                fail("environment variable \"" + name + "\" descends into non-object key \"" +
                     path[i] + "\"");
            cur = &next;
        }
        (*cur)[path.back()] = parsed;
    }
}

ExperimentConfig load(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& env) {
    std::ifstream in(path);
    if (!in) fail("cannot read config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail("parse error in " + path + ": " + e.what());
    }
    apply_env_overrides(j, env);
    ExperimentConfig cfg = from_json(j);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    return cfg;
}

ExperimentConfig load(const std::string& path) { return load(path, env_overrides()); }

}  // namespace uedhvac::config
