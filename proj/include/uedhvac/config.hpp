// Experiment configuration: a single JSON file with nested keys mirroring the
// module config structs. Loading is strict: unknown keys, type mismatches,
// and wrong-length arrays are hard errors naming the offending key, because a
// silently ignored hyperparameter typo is worse than a failed run.
//
// Precedence: per-strategy defaults < config file < UEDHVAC_* environment
// variables < command-line flags. Environment overrides map UEDHVAC_PPO__LR
// to the key path ppo.lr (prefix stripped, lowercased, "__" separating
// levels); values are parsed as JSON fragments and fall back to plain
// strings. Every random stream downstream is derived from the single "seed"
// key via rng::derive(seed, purpose tag, indices), so one master seed pins
// the whole run.
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "uedhvac/trainer.hpp"

namespace uedhvac::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    trainer::TrainerConfig train;
    int workers = 1;  // 1 runs the serial kernels; >1 the OpenMP ones

    void validate() const;
};

// Full schema with every key present; "exec" is derived from workers and not
// emitted. The output re-loads to an identical config.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

// Strict decode. The "strategy" key is read first so the remaining defaults
// come from default_config(strategy). The offset box has library defaults but
// must still be stated explicitly: a config without search.bounds.lo and
// search.bounds.hi is rejected naming the missing key.
ExperimentConfig from_json(const nlohmann::json& j);

// Key/value pairs taken from the process environment, UEDHVAC_* only.
std::vector<std::pair<std::string, std::string>> env_overrides();

// Writes each UEDHVAC_* pair into the config tree (creating intermediate
// objects), leaving other keys alone. Unknown key paths are caught later by
// from_json, so a typoed variable still fails loudly.
void apply_env_overrides(nlohmann::json& j,
                         const std::vector<std::pair<std::string, std::string>>& env);

// parse file -> apply env -> from_json -> validate. The two-argument form
// takes the environment explicitly; the one-argument form uses the process's.
ExperimentConfig load(const std::string& path);
ExperimentConfig load(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& env);

}  // namespace uedhvac::config
