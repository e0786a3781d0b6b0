// On-policy actor-critic: rollout collection with stored dropout masks,
// generalized advantage estimation, and the clipped-surrogate update. The
// value-loss scorer doubles as the replay buffer's level score.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uedhvac/bldg.hpp"
#include "uedhvac/kernels.hpp"
#include "uedhvac/nn.hpp"
#include "uedhvac/ou.hpp"

namespace uedhvac::rl {

inline constexpr int kActDim = 2;  // (cooling, heating) setpoints
inline constexpr double kLogStdMin = -5.0, kLogStdMax = 2.0;

struct PPOParams {
    double lr = 5e-5;
    double clip = 0.3;
    double discount = 0.8;
    double gae_lambda = 0.95;
    int inner_steps = 40;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    int horizon = 1024;
};

// Actor emits [mean_0, mean_1, logstd_0, logstd_1]; log-stds are clamped on
// decode. Critic emits a scalar value.
struct ActorCritic {
    nn::Network actor, critic;
    nn::AdamState actor_opt, critic_opt;
};

ActorCritic make_actor_critic(int obs_dim, const std::vector<int>& hidden, double dropout_p,
                              std::uint64_t seed);

struct GaussianHead {
    double mean[kActDim];
    double logstd[kActDim];   // after clamping
    bool saturated[kActDim];  // raw output fell outside the clamp
};
GaussianHead decode_head(std::span<const double> actor_out);
double log_prob(const GaussianHead& h, std::span<const double> u);
double entropy(const GaussianHead& h);

// u is the raw pre-clamp Gaussian sample in normalized action space; the
// physical setpoints come from clamping into [-1,1] and mapping affinely.
bldg::Action action_from_sample(std::span<const double> u);

// Fixed affine observation map with a +/-10 clip after standardization.
struct ObsNormalizer {
    std::vector<double> mean, stdev;

    int dim() const { return static_cast<int>(mean.size()); }
    void normalize(std::span<const double> x, std::span<double> out) const;
    static ObsNormalizer identity(int dim);
};

// Statistics from running the rule-based controller on the base environment;
// the same map is used for every strategy and frozen into checkpoints.
ObsNormalizer fit_normalizer(const ou::WeatherTrace* base, const ou::EnvConfig& cfg,
                             const bldg::EnvOptions& opt, int episodes, std::uint64_t seed);

// Minimal environment surface the collector needs; the building env adapts
// onto it and tests can supply toy dynamics.
struct EnvIface {
    virtual std::vector<double> reset() = 0;
    virtual std::pair<double, bool> step(const bldg::Action& a) = 0;  // reward, done
    virtual std::vector<double> observe() const = 0;
    virtual ~EnvIface() = default;
};

class BuildingEnvAdapter : public EnvIface {
  public:
    explicit BuildingEnvAdapter(bldg::BuildingEnv env) : env_(std::move(env)) {}
    std::vector<double> reset() override;
    std::pair<double, bool> step(const bldg::Action& a) override;
    std::vector<double> observe() const override;
    bldg::BuildingEnv& env() { return env_; }

  private:
    bldg::BuildingEnv env_;
    bldg::Observation obs_{};
};

struct TrajectoryBatch {
    int n = 0, obs_dim = 0, mask_width = 0;
    std::vector<double> obs;              // n x obs_dim, normalized
    std::vector<double> act;              // n x kActDim, pre-clamp samples
    std::vector<double> logp;             // n, at collection-time parameters
    std::vector<double> reward;           // n
    std::vector<double> value;            // n, dropout-off critic
    std::vector<double> advantage;        // n
    std::vector<double> target;           // n
    std::vector<std::uint8_t> done;       // n
    std::vector<std::uint8_t> actor_mask; // n x mask_width, masks used to act
    double bootstrap_value = 0.0;         // clean value after the last step (0 if done)

    double mean_reward() const;
};

// Rolls the current stochastic policy for up to `horizon` steps (stops early
// at episode end). Dropout stays active on the actor with 1/(1-p) scaling and
// the drawn masks are recorded so the updater can reproduce the collection
// distribution exactly. Values and the bootstrap use the dropout-off critic.
TrajectoryBatch collect_trajectories(EnvIface& env, const ActorCritic& ac,
                                     const ObsNormalizer& norm, int horizon, std::uint64_t seed);

// Standard recursion; targets are advantage + value. done flags cut the
// bootstrap within the batch; the tail bootstraps batch.bootstrap_value.
void compute_gae(TrajectoryBatch& batch, double discount, double lambda);

struct UpdateStats {
    double mean_reward = 0.0;
    double value_loss = 0.0;  // dropout-off MAE before this update
    double entropy = 0.0;     // policy entropy at the old parameters
    double policy_loss = 0.0; // negative surrogate at the first inner step
};

// Clipped-surrogate maximization + 0.5 value MSE + 0.01 entropy bonus, run
// for params.inner_steps full-batch steps through adam_update. Advantages are
// normalized per batch. Critic dropout masks are drawn once per update from
// `seed`; actor masks are the stored rollout masks, making the importance
// ratio exactly 1 at the first step.
UpdateStats ppo_update(ActorCritic& ac, const TrajectoryBatch& batch, const PPOParams& params,
                       std::uint64_t seed, kernels::Exec exec);

// Mean absolute error of the dropout-off critic against the batch targets.
double value_loss(const TrajectoryBatch& batch, const nn::Network& critic, kernels::Exec exec);

}  // namespace uedhvac::rl
