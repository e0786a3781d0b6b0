#include "uedhvac/rl.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "uedhvac/rng.hpp"

namespace uedhvac::rl {

namespace {

constexpr double kHalfLog2Pi = 0.5 * 1.8378770664093453;  // 0.5*log(2*pi)

double clamp01sym(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

ActorCritic make_actor_critic(int obs_dim, const std::vector<int>& hidden, double dropout_p,
                              std::uint64_t seed) {
    ActorCritic ac;
    ac.actor = nn::make_network(obs_dim, hidden, 2 * kActDim, dropout_p,
                                rng::derive(seed, "actor-init"));
    ac.critic = nn::make_network(obs_dim, hidden, 1, dropout_p, rng::derive(seed, "critic-init"));
    ac.actor_opt.init_like(ac.actor);
    ac.critic_opt.init_like(ac.critic);
    return ac;
}

GaussianHead decode_head(std::span<const double> actor_out) {
    if (actor_out.size() != 2 * kActDim) throw std::invalid_argument("actor head size mismatch");
    GaussianHead h{};
    for (int k = 0; k < kActDim; ++k) {
        h.mean[k] = actor_out[k];
        const double raw = actor_out[kActDim + k];
        h.saturated[k] = raw < kLogStdMin || raw > kLogStdMax;
        h.logstd[k] = raw < kLogStdMin ? kLogStdMin : (raw > kLogStdMax ? kLogStdMax : raw);
    }
    return h;
}

double log_prob(const GaussianHead& h, std::span<const double> u) {
    double lp = 0.0;
    for (int k = 0; k < kActDim; ++k) {
        const double s = std::exp(h.logstd[k]);
        const double z = (u[k] - h.mean[k]) / s;
        lp += -0.5 * z * z - h.logstd[k] - kHalfLog2Pi;
    }
    return lp;
}

double entropy(const GaussianHead& h) {
    double e = 0.0;
    for (int k = 0; k < kActDim; ++k) e += h.logstd[k] + 0.5 + kHalfLog2Pi;
    return e;
}

bldg::Action action_from_sample(std::span<const double> u) {
    if (u.size() != kActDim) throw std::invalid_argument("action sample size mismatch");
    const double c = (clamp01sym(u[0]) + 1.0) * 0.5;
    const double hvab = (clamp01sym(u[1]) + 1.0) * 0.5;
    return {bldg::kCoolLo + c * (bldg::kCoolHi - bldg::kCoolLo),
            bldg::kHeatLo + hvab * (bldg::kHeatHi - bldg::kHeatLo)};
}

void ObsNormalizer::normalize(std::span<const double> x, std::span<double> out) const {
    if (static_cast<int>(x.size()) != dim() || out.size() != x.size())
        throw std::invalid_argument("normalizer dim mismatch");
    for (int i = 0; i < dim(); ++i) {
        double v = (x[i] - mean[i]) / stdev[i];
        out[i] = v < -10.0 ? -10.0 : (v > 10.0 ? 10.0 : v);
    }
}

ObsNormalizer ObsNormalizer::identity(int dim) {
    ObsNormalizer n;
    n.mean.assign(dim, 0.0);
    n.stdev.assign(dim, 1.0);
    return n;
}

ObsNormalizer fit_normalizer(const ou::WeatherTrace* base, const ou::EnvConfig& cfg,
                             const bldg::EnvOptions& opt, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("fit_normalizer needs >= 1 episode");
    std::vector<double> sum(bldg::kObsDim, 0.0), sumsq(bldg::kObsDim, 0.0);
    std::int64_t count = 0;
    for (int e = 0; e < episodes; ++e) {
        bldg::BuildingEnv env(base, cfg, opt, rng::derive(seed, "norm-episode", e));
        auto obs = env.reset();
        for (int t = 0; t < env.steps_per_episode(); ++t) {
            const auto res = env.step(bldg::rbc_policy(obs));
            obs = res.obs;
            for (int i = 0; i < bldg::kObsDim; ++i) {
                sum[i] += obs[i];
                sumsq[i] += obs[i] * obs[i];
            }
            ++count;
        }
    }
    ObsNormalizer norm;
    norm.mean.resize(bldg::kObsDim);
    norm.stdev.resize(bldg::kObsDim);
    for (int i = 0; i < bldg::kObsDim; ++i) {
        norm.mean[i] = sum[i] / count;
        const double var = sumsq[i] / count - norm.mean[i] * norm.mean[i];
        norm.stdev[i] = std::sqrt(var > 0.0 ? var : 0.0);
        if (norm.stdev[i] < 1e-6) norm.stdev[i] = 1e-6;  // constant coordinates
    }
    return norm;
}

std::vector<double> BuildingEnvAdapter::reset() {
    obs_ = env_.reset();
    return {obs_.begin(), obs_.end()};
}

std::pair<double, bool> BuildingEnvAdapter::step(const bldg::Action& a) {
    const auto res = env_.step(a);
    obs_ = res.obs;
    return {res.reward, res.done};
}

std::vector<double> BuildingEnvAdapter::observe() const { return {obs_.begin(), obs_.end()}; }

double TrajectoryBatch::mean_reward() const {
    if (n == 0) return 0.0;
    double s = 0.0;
    for (double r : reward) s += r;
    return s / n;
}

TrajectoryBatch collect_trajectories(EnvIface& env, const ActorCritic& ac,
                                     const ObsNormalizer& norm, int horizon, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const int obs_dim = ac.actor.input_dim();
    const double p = ac.actor.dropout_p;
    const double scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;

    TrajectoryBatch b;
    b.obs_dim = obs_dim;
    b.mask_width = ac.actor.hidden_units();
    b.obs.reserve(static_cast<std::size_t>(horizon) * obs_dim);
    b.actor_mask.reserve(static_cast<std::size_t>(horizon) * b.mask_width);

    auto mask_eng = rng::engine(rng::derive(seed, "rollout-mask"));
    auto act_eng = rng::engine(rng::derive(seed, "rollout-act"));
    std::normal_distribution<double> gauss;

    std::vector<double> nobs(obs_dim);
    bool done = false;
    for (int t = 0; t < horizon && !done; ++t) {
        const auto raw = env.observe();
        norm.normalize(raw, nobs);

        const auto mask = p > 0.0 ? nn::draw_mask(ac.actor, p, mask_eng)
                                  : nn::full_mask(ac.actor);
        const auto head =
            decode_head(nn::forward(ac.actor, nobs, mask.keep.data(), scale));

        double u[kActDim];
        for (int k = 0; k < kActDim; ++k)
            u[k] = head.mean[k] + std::exp(head.logstd[k]) * gauss(act_eng);
        const double lp = log_prob(head, {u, kActDim});

        const auto [reward, fin] = env.step(action_from_sample({u, kActDim}));
        done = fin;

        b.obs.insert(b.obs.end(), nobs.begin(), nobs.end());
        b.act.insert(b.act.end(), u, u + kActDim);
        b.logp.push_back(lp);
        b.reward.push_back(reward);
        b.value.push_back(nn::forward(ac.critic, nobs)[0]);
        b.done.push_back(fin ? 1 : 0);
        b.actor_mask.insert(b.actor_mask.end(), mask.keep.begin(), mask.keep.end());
        ++b.n;
    }
    if (done)
        b.bootstrap_value = 0.0;
    else {
        norm.normalize(env.observe(), nobs);
        b.bootstrap_value = nn::forward(ac.critic, nobs)[0];
    }
    return b;
}

void compute_gae(TrajectoryBatch& b, double discount, double lambda) {
    if (b.n == 0) return;
    if (static_cast<int>(b.value.size()) != b.n) throw std::invalid_argument("values missing");
    b.advantage.assign(b.n, 0.0);
    b.target.assign(b.n, 0.0);
    double adv = 0.0;
    for (int t = b.n - 1; t >= 0; --t) {
        double next_v = 0.0;
        if (!b.done[t]) next_v = (t + 1 < b.n) ? b.value[t + 1] : b.bootstrap_value;
        const double delta = b.reward[t] + discount * next_v - b.value[t];
        const double cont = b.done[t] ? 0.0 : 1.0;
        adv = delta + discount * lambda * cont * ((t + 1 < b.n) ? adv : 0.0);
        b.advantage[t] = adv;
        b.target[t] = adv + b.value[t];
    }
    for (double a : b.advantage)
        if (!std::isfinite(a)) throw std::runtime_error("non-finite advantage");
}

double value_loss(const TrajectoryBatch& b, const nn::Network& critic, kernels::Exec exec) {
    if (b.n == 0) return 0.0;
    if (b.target.empty()) throw std::invalid_argument("targets missing");
    std::vector<double> v(b.n);
    kernels::batch_forward(critic, b.obs.data(), b.n, nullptr, 1.0, v.data(), exec);
    double mae = 0.0;
    for (int i = 0; i < b.n; ++i) mae += std::abs(v[i] - b.target[i]);
    return mae / b.n;
}

UpdateStats ppo_update(ActorCritic& ac, const TrajectoryBatch& b, const PPOParams& params,
                       std::uint64_t seed, kernels::Exec exec) {
    if (b.n == 0) throw std::invalid_argument("empty batch");
    if (static_cast<int>(b.advantage.size()) != b.n)
        throw std::invalid_argument("advantages missing; run compute_gae first");
    const int n = b.n;

    UpdateStats stats;
    stats.mean_reward = b.mean_reward();
    stats.value_loss = value_loss(b, ac.critic, exec);

    // per-batch advantage normalization
    double am = 0.0;
    for (double a : b.advantage) am += a;
    am /= n;
    double av = 0.0;
    for (double a : b.advantage) av += (a - am) * (a - am);
    const double asd = std::sqrt(av / n) + 1e-8;
    std::vector<double> adv(n);
    for (int i = 0; i < n; ++i) adv[i] = (b.advantage[i] - am) / asd;

    // actor masks are the rollout masks; critic masks are drawn once here
    const double pa = ac.actor.dropout_p, pc = ac.critic.dropout_p;
    const double sa = pa > 0.0 ? 1.0 / (1.0 - pa) : 1.0;
    const double sc = pc > 0.0 ? 1.0 / (1.0 - pc) : 1.0;
    const std::uint8_t* amask = (pa > 0.0 && !b.actor_mask.empty()) ? b.actor_mask.data() : nullptr;
    std::vector<std::uint8_t> cmask;
    if (pc > 0.0) {
        auto eng = rng::engine(rng::derive(seed, "critic-mask"));
        cmask.resize(static_cast<std::size_t>(n) * ac.critic.hidden_units());
        std::bernoulli_distribution drop(pc);
        for (auto& k : cmask) k = drop(eng) ? 0 : 1;
    }

    const int aout = ac.actor.output_dim();
    std::vector<double> A(static_cast<std::size_t>(n) * aout), V(n);
    std::vector<double> dA(A.size()), dV(n);
    nn::GradientBundle ga, gc;

    for (int it = 0; it < params.inner_steps; ++it) {
        kernels::batch_forward(ac.actor, b.obs.data(), n, amask, amask ? sa : 1.0, A.data(), exec);
        kernels::batch_forward(ac.critic, b.obs.data(), n, cmask.empty() ? nullptr : cmask.data(),
                               cmask.empty() ? 1.0 : sc, V.data(), exec);

        double surr_sum = 0.0, ent_sum = 0.0, vloss_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* arow = &A[static_cast<std::size_t>(i) * aout];
            double* drow = &dA[static_cast<std::size_t>(i) * aout];
            const auto head = decode_head({arow, static_cast<std::size_t>(aout)});
            const double* u = &b.act[static_cast<std::size_t>(i) * kActDim];

            const double lp = log_prob(head, {u, kActDim});
            const double ratio = std::exp(lp - b.logp[i]);
            const double lo = 1.0 - params.clip, hi = 1.0 + params.clip;
            const double clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
            const double ut = ratio * adv[i], ct = clipped * adv[i];
            surr_sum += ut < ct ? ut : ct;
            // d surr / d lp: min picks the clipped branch on ties, so the
            // clip=0 surrogate is flat at the old parameters.
            const bool inside = ratio > lo && ratio < hi;
            const double dsurr_dlp = (ut < ct || inside) ? ratio * adv[i] : 0.0;

            const double ent = entropy(head);
            ent_sum += ent;

            for (int k = 0; k < kActDim; ++k) {
                const double s = std::exp(head.logstd[k]);
                const double z = (u[k] - head.mean[k]) / s;
                // maximize surr + entropy_coef*ent: emit the negated gradient
                drow[k] = -(dsurr_dlp * z / s) / n;
                const double dlp_dls = z * z - 1.0;
                const double g =
                    head.saturated[k] ? 0.0 : dsurr_dlp * dlp_dls + params.entropy_coef;
                drow[kActDim + k] = -g / n;
            }

            const double verr = V[i] - b.target[i];
            vloss_sum += verr * verr;
            dV[i] = params.value_coef * 2.0 * verr / n;
        }
        const double loss =
            -surr_sum / n - params.entropy_coef * ent_sum / n + params.value_coef * vloss_sum / n;
        if (!std::isfinite(loss)) {
            char msg[160];
            std::snprintf(msg, sizeof msg,
                          "ppo_update: non-finite loss at inner step %d (surr=%g ent=%g v=%g)", it,
                          surr_sum / n, ent_sum / n, vloss_sum / n);
            throw std::runtime_error(msg);
        }
        if (it == 0) {
            stats.entropy = ent_sum / n;
            stats.policy_loss = -surr_sum / n;
        }

        kernels::batch_backward_accum(ac.actor, b.obs.data(), n, amask, amask ? sa : 1.0,
                                      dA.data(), ga, exec);
        kernels::batch_backward_accum(ac.critic, b.obs.data(), n,
                                      cmask.empty() ? nullptr : cmask.data(),
                                      cmask.empty() ? 1.0 : sc, dV.data(), gc, exec);
        nn::adam_update(ac.actor, ga, ac.actor_opt, params.lr);
        nn::adam_update(ac.critic, gc, ac.critic_opt, params.lr);
    }
    return stats;
}

}  // namespace uedhvac::rl
