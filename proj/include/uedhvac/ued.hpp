// Environment-design strategies: the prioritized replay buffer with
// rank/staleness mixture sampling, uniform domain randomization, and the
// uncertainty-maximizing configuration search under box constraints (solved
// by an adaptive-moment extragradient saddle scheme) with a soft distance
// penalty back to the nominal configuration.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "uedhvac/kernels.hpp"
#include "uedhvac/nn.hpp"
#include "uedhvac/ou.hpp"
#include "uedhvac/rl.hpp"

namespace uedhvac::ued {

using Phi = std::array<double, ou::kNumVars>;

struct PLRConfig {
    double rho_staleness = 0.1;
    double beta_temperature = 0.1;
    int n_plr = 100;

    void validate() const;
};

// Append-only level store. Scores are value-loss magnitudes (nonnegative);
// stamps hold the episode counter at last replay.
struct LevelBuffer {
    std::vector<Phi> phis;
    std::vector<double> scores;
    std::vector<std::int64_t> stamps;
    std::int64_t counter = 0;

    int size() const { return static_cast<int>(phis.size()); }
    int insert(const Phi& phi);              // score 0, stamp 0
    void update_score(int i, double score);  // score must be >= 0
    void touch(int i);                       // stamp_i <- counter
};

// Bernoulli with p = min(1, size / n_plr): replay vs generate.
bool sample_replay_decision(int buffer_size, int n_plr, std::mt19937_64& rng);

// Mixture (1-rho)*rank + rho*staleness. Rank weights are (1/rank)^(1/beta)
// over descending scores, ties resolved toward the earlier index; staleness
// is proportional to (counter - stamp), uniform when everything is fresh.
std::vector<double> plr_probabilities(const LevelBuffer& buf, const PLRConfig& cfg);

// Samples from the mixture and stamps the chosen level with the counter.
int plr_sample(LevelBuffer& buf, const PLRConfig& cfg, std::mt19937_64& rng);

Phi domain_randomize(const Phi& a, const Phi& b, std::mt19937_64& rng);

struct SearchConfig {
    int n_iters = 91;
    double step_size = 0.01;
    double soft_weight = 0.5;
    Phi lo = ou::kOffsetLo;
    Phi hi = ou::kOffsetHi;
    int mc_passes = 10;
    double dropout = 0.1;
    bool squared_distance = false;  // Euclidean by default

    void validate() const;
};

// Multipliers for the box constraints: `lambda` guards the lower bounds
// (slack phi - a), `nu` the upper bounds (slack b - phi). Projection keeps
// both nonnegative.
struct MultiplierState {
    Phi lambda{};
    Phi nu{};
};

// The uncertainty surface the search climbs. `iter` indexes the mask draw so
// one search iteration sees a consistent surface while successive iterations
// resample it.
struct UncertaintyModel {
    virtual double value(const Phi& phi, int iter) const = 0;
    virtual Phi gradient(const Phi& phi, int iter) const = 0;
    virtual ~UncertaintyModel() = default;
};

// Uncertainty minus soft_weight times the distance to phi0 (Euclidean, or
// squared under the config flag). The distance gradient at phi == phi0 is 0.
double objective(const UncertaintyModel& model, const Phi& phi, const Phi& phi0, double gamma,
                 bool squared = false, int iter = 0);

struct ExtraAdamState {
    Phi m_phi{}, v_phi{}, m_lambda{}, v_lambda{}, m_nu{}, v_nu{};
    std::int64_t t = 0;
};

// One lookahead iteration on the joint variable (phi, lambda, nu): a half
// step from the field at the current point, then the real step from the field
// at the half point, both through per-coordinate adaptive-moment scaling and
// the box/nonnegativity projection. grad_fn returns the ascent gradient of
// the objective in phi. Returns false on a non-finite field; the iterate is
// left at its last valid value.
bool extragradient_step(Phi& phi, MultiplierState& mult,
                        const std::function<Phi(const Phi&)>& grad_fn, ExtraAdamState& state,
                        double eta, const Phi& a, const Phi& b);

// n_iters extragradient iterations from phi0, fresh masks per iteration.
// The result always lies inside [lo, hi].
Phi active_search(const UncertaintyModel& model, const Phi& phi0, const SearchConfig& cfg);

// Same, but the ascent starts at `start` while the soft distance penalty
// stays anchored at `anchor`. Lets a caller chain searches episode over
// episode without moving the anchor the penalty pulls toward.
Phi active_search(const UncertaintyModel& model, const Phi& start, const Phi& anchor,
                  const SearchConfig& cfg);

// Critic-backed surface: assembles the physical observation for offset phi
// (weather slice = episode-start weather + phi, clamped to physical bounds),
// normalizes it, and differentiates the MC-dropout variance back through the
// affine map. Gradients vanish in coordinates pushed strictly outside the
// physical value bounds; a coordinate sitting exactly on a bound stays live.
class CriticUncertainty : public UncertaintyModel {
  public:
    CriticUncertainty(const nn::Network* critic, const rl::ObsNormalizer* norm,
                      std::vector<double> base_obs, double dropout, int passes,
                      std::uint64_t seed, kernels::Exec exec);

    double value(const Phi& phi, int iter) const override;
    Phi gradient(const Phi& phi, int iter) const override;

  private:
    std::vector<double> assemble(const Phi& phi, std::array<bool, ou::kNumVars>& live) const;

    const nn::Network* critic_;
    const rl::ObsNormalizer* norm_;
    std::vector<double> base_obs_;  // physical units, phi0 weather in slots 0..4
    double dropout_;
    int passes_;
    std::uint64_t seed_;
    kernels::Exec exec_;
};

}  // namespace uedhvac::ued
