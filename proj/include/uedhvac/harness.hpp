// Evaluation harness: the named extreme-weather suite, deterministic policy
// wrappers (rule-based, random, constant, trained network), per-episode
// comfort/energy metrics, coarse-vs-fine fidelity comparison with held
// actions, soft-weight/step-size ablation sweeps, and CSV/JSON report output.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uedhvac/bldg.hpp"
#include "uedhvac/ou.hpp"
#include "uedhvac/rl.hpp"
#include "uedhvac/trainer.hpp"

namespace uedhvac::harness {

struct SuiteEntry {
    std::string name;
    ou::EnvConfig cfg;
};

// Six named scenarios: the nominal zero-offset config plus five stress cases
// (hot drought, wet storm, humid heatwave, cold snap, and an erratic variant
// with zero offsets but tripled noise). All offsets satisfy the bounds table.
std::vector<SuiteEntry> extreme_suite();

struct Policy {
    virtual bldg::Action act(const bldg::Observation& obs) = 0;
    // Called once before each evaluation episode; stochastic policies reseed
    // here so identical seeds give identical reports.
    virtual void reset_episode(std::uint64_t) {}
    virtual ~Policy() = default;
};

class RbcPolicy : public Policy {
  public:
    bldg::Action act(const bldg::Observation& obs) override;
};

class RandomPolicy : public Policy {
  public:
    bldg::Action act(const bldg::Observation&) override;
    void reset_episode(std::uint64_t seed) override;

  private:
    std::mt19937_64 rng_{0};
};

class ConstantPolicy : public Policy {
  public:
    explicit ConstantPolicy(bldg::Action a) : a_(a) {}
    bldg::Action act(const bldg::Observation&) override { return a_; }

  private:
    bldg::Action a_;
};

// Deterministic trained policy: normalized observation through the actor with
// dropout off, action = the clamped mean head (no exploration noise).
class NetworkPolicy : public Policy {
  public:
    NetworkPolicy(nn::Network actor, rl::ObsNormalizer norm);
    static NetworkPolicy from_checkpoint(const std::string& path);

    bldg::Action act(const bldg::Observation& obs) override;

  private:
    nn::Network actor_;
    rl::ObsNormalizer norm_;
};

// Per-step episode log, the input to the comfort-day counter.
struct StepLog {
    std::vector<double> ppd;
    std::vector<int> occupancy;
    std::vector<int> day;  // day of year, 1-based
};

// A calendar day counts as violated when any of its occupied steps has
// PPD above 20.
int comfort_violation_days(const StepLog& log);

int day_of_year(int month, int day);  // non-leap calendar, 1-based

struct EpisodeMetrics {
    double reward = 0.0;     // time-integrated return: sum of reward * dt
    int violation_days = 0;  // in [0, 365]
    double energy_wh = 0.0;  // sum of electric power * dt
    double mean_ppd = 0.0;   // over occupied steps; 0 if never occupied
    double hours = 0.0;      // simulated span, steps * dt
};

// Runs one full episode. The policy is queried every `action_hold` steps and
// its action repeated in between (1 = act every step). Rewards are summed
// weighted by dt so returns are comparable across fidelities.
EpisodeMetrics run_episode(Policy& policy, const ou::WeatherTrace* base,
                           const ou::EnvConfig& cfg, const bldg::EnvOptions& opt,
                           std::uint64_t seed, int action_hold = 1);

struct EvalRow {
    std::string env;
    std::string strategy;
    std::uint64_t seed = 0;
    double reward = 0.0;          // means over this seed's episodes
    double violation_days = 0.0;
    double energy_wh = 0.0;
    double mean_ppd = 0.0;
};

struct EvalSummary {
    std::string env;
    std::string strategy;
    int seeds = 0;
    double mean_reward = 0.0;
    double se_reward = 0.0;  // sample standard error over seeds; 0 for one seed
    double mean_violation_days = 0.0;
    double mean_energy_wh = 0.0;
    double mean_ppd = 0.0;
};

// One row per seed: `episodes` episodes per seed with derived env seeds,
// deterministic policy actions (dropout off, no exploration noise).
std::vector<EvalRow> evaluate(Policy& policy, const std::string& env_name,
                              const std::string& strategy_name, const ou::WeatherTrace* base,
                              const ou::EnvConfig& cfg, const bldg::EnvOptions& opt, int episodes,
                              std::span<const std::uint64_t> seeds);

std::vector<EvalRow> evaluate_suite(Policy& policy, const std::string& strategy_name,
                                    const std::vector<SuiteEntry>& suite,
                                    const ou::WeatherTrace* base, const bldg::EnvOptions& opt,
                                    int episodes, std::span<const std::uint64_t> seeds);

// Groups rows by (env, strategy) preserving first-appearance order.
std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows);

struct Sim2RealRow {
    std::string env;
    double reward_coarse = 0.0;  // dt = 1.0
    double reward_fine = 0.0;    // dt = 1/hold, actions held
    // (fine - coarse) / |coarse|: negative when the policy degrades at the
    // finer step. Refinement tightens the thermostat loop, so robust policies
    // sit near zero and fidelity-sensitive ones swing further.
    double drop = 0.0;
    double hours_coarse = 0.0;
    double hours_fine = 0.0;
};

struct Sim2RealReport {
    std::vector<Sim2RealRow> rows;
    double mean_drop = 0.0;
};

// Evaluates the policy on every suite entry at dt = 1.0 and again at
// dt = 1/hold with each hourly action repeated `hold` times; both runs cover
// the same simulated span. hold must be 1, 2, or 4.
Sim2RealReport sim2real_eval(Policy& policy, const std::vector<SuiteEntry>& suite,
                             const ou::WeatherTrace* base, int hold, int episodes,
                             std::span<const std::uint64_t> seeds,
                             const bldg::RewardParams& reward = {});

struct AblationRow {
    double value = 0.0;
    std::vector<EvalRow> rows;          // per env x seed
    std::vector<EvalSummary> summaries; // per env
    double suite_mean_reward = 0.0;     // mean over all rows
};

// Trains the search strategy once per value (param "gamma" sweeps the soft
// distance weight, "eta" the search step size), then evaluates each trained
// policy across the suite. Training artifacts land in out_dir/<param>-<index>.
std::vector<AblationRow> ablation(const std::string& param, const std::vector<double>& values,
                                  const trainer::TrainerConfig& base_cfg,
                                  const ou::WeatherTrace* base,
                                  const std::vector<SuiteEntry>& suite, int episodes,
                                  std::span<const std::uint64_t> seeds);

// CSV with header env,strategy,seed,reward,violation_days,energy_wh,mean_ppd.
void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows);
// Inverse of write_report_csv; round-trips its numbers exactly. Throws on a
// wrong header or a malformed line, naming the line number.
std::vector<EvalRow> read_report_csv(const std::string& path);
// {"rows": [...], "summary": [...]} with the same fields.
void write_report_json(const std::string& path, const std::vector<EvalRow>& rows,
                       const std::vector<EvalSummary>& summaries);
// Plot-ready long format: panel,metric,env,strategy,seed,value with panels
// A = reward, B = violation days, C = energy.
void write_long_csv(const std::string& path, const std::vector<EvalRow>& rows);

}  // namespace uedhvac::harness
