// Training orchestration: per-episode environment selection (fixed nominal,
// randomized, replay-buffer, or uncertainty-search), chunked PPO updates,
// JSON-lines metrics/level logs, and exact double-precision snapshots that
// make a killed run resumable at the last episode boundary.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uedhvac/bldg.hpp"
#include "uedhvac/kernels.hpp"
#include "uedhvac/ou.hpp"
#include "uedhvac/rl.hpp"
#include "uedhvac/ued.hpp"

namespace uedhvac::trainer {

enum class Strategy { vanilla, dr, plr, rplr, active_rl, active_plr };

Strategy strategy_from_string(const std::string& s);  // throws on unknown name
const char* to_string(Strategy k);
bool uses_buffer(Strategy k);  // plr, rplr, active_plr
bool uses_search(Strategy k);  // active_rl, active_plr

struct TrainerConfig {
    Strategy strategy = Strategy::vanilla;
    std::uint64_t seed = 1;
    std::int64_t total_steps = 200'000;
    int snapshot_every = 4;  // episodes between snapshots
    int norm_episodes = 10;  // rule-based episodes feeding the normalizer fit
    std::vector<int> hidden = {64, 64};
    double dropout = 0.1;
    double dt = 1.0;
    rl::PPOParams ppo;
    ued::PLRConfig replay;
    // search.lo/hi are physical offset bounds; search.step_size moves offsets
    // in observation-sigma units (the trainer rescales per coordinate). Each
    // episode's search resumes from the previous result; the soft penalty
    // anchor stays at the nominal offsets.
    ued::SearchConfig search;
    bldg::RewardParams reward;
    std::string out_dir = ".";
    kernels::Exec exec = kernels::Exec::parallel;

    void validate() const;
};

// Config with the replay knobs tuned per strategy; the search block keeps its
// shared defaults.
TrainerConfig default_config(Strategy k);

struct TrainResult {
    std::int64_t episodes = 0;
    std::int64_t steps = 0;
    double final_mean_reward = 0.0;  // last chunk's rollout mean
    rl::ActorCritic ac;
    rl::ObsNormalizer norm;
};

// Runs (or resumes) a training run in cfg.out_dir. Files written there:
//   metrics.jsonl  one record per update chunk: {step, mean_reward, value_loss, entropy}
//   levels.jsonl   one record per episode: {episode, strategy, phi, source, score}
//   state.json     full-precision training state at the last episode boundary
//   actor.ckpt / critic.ckpt  float32 export for evaluation tooling
//
// An existing state.json is picked up automatically; the log files are
// truncated back to the snapshot's line counts, so a mid-episode kill leaves
// no partial records behind. Every random stream is derived statelessly from
// cfg.seed and the episode/chunk index, which is what makes the resumed run
// byte-identical to an uninterrupted one.
//
// Episodes stop at the first boundary where `steps >= total_steps`; each
// episode is one simulated year. Level scores are the episode's
// length-weighted post-update critic error, computed after each chunk's
// update per the replay scoring rule.
TrainResult run_training(const ou::WeatherTrace* base, const TrainerConfig& cfg);

}  // namespace uedhvac::trainer
