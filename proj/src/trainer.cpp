#include "uedhvac/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uedhvac/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace uedhvac::trainer {

Strategy strategy_from_string(const std::string& s) {
    if (s == "vanilla") return Strategy::vanilla;
    if (s == "dr") return Strategy::dr;
    if (s == "plr") return Strategy::plr;
    if (s == "rplr") return Strategy::rplr;
    if (s == "active_rl") return Strategy::active_rl;
    if (s == "active_plr") return Strategy::active_plr;
    throw std::invalid_argument("unknown strategy: " + s);
}

const char* to_string(Strategy k) {
    switch (k) {
        case Strategy::vanilla: return "vanilla";
        case Strategy::dr: return "dr";
        case Strategy::plr: return "plr";
        case Strategy::rplr: return "rplr";
        case Strategy::active_rl: return "active_rl";
        case Strategy::active_plr: return "active_plr";
    }
    throw std::logic_error("bad strategy enum");
}

bool uses_buffer(Strategy k) {
    return k == Strategy::plr || k == Strategy::rplr || k == Strategy::active_plr;
}

bool uses_search(Strategy k) { return k == Strategy::active_rl || k == Strategy::active_plr; }

void TrainerConfig::validate() const {
    if (total_steps < 0) throw std::invalid_argument("trainer: total_steps must be >= 0");
    if (snapshot_every < 1) throw std::invalid_argument("trainer: snapshot_every must be >= 1");
    if (norm_episodes < 1) throw std::invalid_argument("trainer: norm_episodes must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("trainer: hidden layers required");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("trainer: hidden sizes must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("trainer: dropout must be in [0, 1)");
    if (!(ppo.lr > 0.0)) throw std::invalid_argument("trainer: lr must be > 0");
    if (!(ppo.clip >= 0.0)) throw std::invalid_argument("trainer: clip must be >= 0");
    if (!(ppo.discount > 0.0 && ppo.discount <= 1.0))
        throw std::invalid_argument("trainer: discount must be in (0, 1]");
    if (!(ppo.gae_lambda >= 0.0 && ppo.gae_lambda <= 1.0))
        throw std::invalid_argument("trainer: gae_lambda must be in [0, 1]");
    if (ppo.inner_steps < 1) throw std::invalid_argument("trainer: inner_steps must be >= 1");
    if (ppo.horizon < 1) throw std::invalid_argument("trainer: horizon must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("trainer: out_dir required");
    replay.validate();
    search.validate();
}

TrainerConfig default_config(Strategy k) {
    TrainerConfig cfg;
    cfg.strategy = k;
    if (k == Strategy::plr || k == Strategy::rplr) {
        cfg.replay.rho_staleness = 0.045;
        cfg.replay.beta_temperature = 0.0015;
        cfg.replay.n_plr = 10;
    } else {
        cfg.replay.rho_staleness = 0.1;
        cfg.replay.beta_temperature = 0.1;
        cfg.replay.n_plr = 100;
    }
    return cfg;
}

namespace {

ordered_json net_to_json(const nn::Network& net) {
    ordered_json layers = ordered_json::array();
    for (const auto& l : net.layers)
        layers.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
    return {{"dropout_p", net.dropout_p}, {"layers", std::move(layers)}};
}

nn::Network net_from_json(const nlohmann::json& j) {
    nn::Network net;
    net.dropout_p = j.at("dropout_p").get<double>();
    for (const auto& lj : j.at("layers")) {
        nn::Layer l;
        l.in = lj.at("in").get<int>();
        l.out = lj.at("out").get<int>();
        l.w = lj.at("w").get<std::vector<double>>();
        l.b = lj.at("b").get<std::vector<double>>();
        if (static_cast<int>(l.w.size()) != l.in * l.out ||
            static_cast<int>(l.b.size()) != l.out)
            throw std::runtime_error("training state: layer size mismatch");
        net.layers.push_back(std::move(l));
    }
    return net;
}

ordered_json adam_to_json(const nn::AdamState& st) {
    return {{"mw", st.mw}, {"vw", st.vw}, {"mb", st.mb}, {"vb", st.vb}, {"t", st.t}};
}

nn::AdamState adam_from_json(const nlohmann::json& j, const nn::Network& net) {
    nn::AdamState st;
    st.mw = j.at("mw").get<std::vector<std::vector<double>>>();
    st.vw = j.at("vw").get<std::vector<std::vector<double>>>();
    st.mb = j.at("mb").get<std::vector<std::vector<double>>>();
    st.vb = j.at("vb").get<std::vector<std::vector<double>>>();
    st.t = j.at("t").get<std::int64_t>();
    if (st.mw.size() != net.layers.size())
        throw std::runtime_error("training state: optimizer shape mismatch");
    for (std::size_t l = 0; l < net.layers.size(); ++l)
        if (st.mw[l].size() != net.layers[l].w.size() || st.mb[l].size() != net.layers[l].b.size())
            throw std::runtime_error("training state: optimizer shape mismatch");
    return st;
}

bool same_shape(const nn::Network& a, const nn::Network& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        if (a.layers[l].in != b.layers[l].in || a.layers[l].out != b.layers[l].out) return false;
    return true;
}

struct RunState {
    std::int64_t episode = 0;  // episodes completed
    std::int64_t steps = 0;
    double final_mean_reward = 0.0;
    std::int64_t metrics_lines = 0, levels_lines = 0;
    ued::LevelBuffer buffer;
    rl::ActorCritic ac;
    rl::ObsNormalizer norm;
    std::vector<double> base_obs;  // nominal-config reset observation, physical units
    ued::Phi search_phi{};         // where the last uncertainty search left off
};

ordered_json normalizer_extra(const rl::ObsNormalizer& norm) {
    return {{"normalizer", {{"mean", norm.mean}, {"stdev", norm.stdev}}}};
}

void write_snapshot(const TrainerConfig& cfg, const RunState& st) {
    const fs::path dir(cfg.out_dir);
    ordered_json j{
        {"format", "uedhvac-train-state"},
        {"version", 1},
        {"strategy", to_string(cfg.strategy)},
        {"episode", st.episode},
        {"steps", st.steps},
        {"final_mean_reward", st.final_mean_reward},
        {"metrics_lines", st.metrics_lines},
        {"levels_lines", st.levels_lines},
        {"buffer",
         {{"counter", st.buffer.counter},
          {"phis", st.buffer.phis},
          {"scores", st.buffer.scores},
          {"stamps", st.buffer.stamps}}},
        {"normalizer", {{"mean", st.norm.mean}, {"stdev", st.norm.stdev}}},
        {"base_obs", st.base_obs},
        {"search_phi", st.search_phi},
        {"actor", net_to_json(st.ac.actor)},
        {"critic", net_to_json(st.ac.critic)},
        {"actor_opt", adam_to_json(st.ac.actor_opt)},
        {"critic_opt", adam_to_json(st.ac.critic_opt)},
    };
    const fs::path tmp = dir / "state.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << j.dump() << '\n';
    }
    fs::rename(tmp, dir / "state.json");

    nn::save_network(st.ac.actor, (dir / "actor.ckpt").string(), normalizer_extra(st.norm));
    nn::save_network(st.ac.critic, (dir / "critic.ckpt").string(), normalizer_extra(st.norm));
}

RunState fresh_state(const ou::WeatherTrace* base, const TrainerConfig& cfg) {
    RunState st;
    ou::EnvConfig ecfg;
    bldg::EnvOptions opt;
    opt.dt = cfg.dt;
    opt.reward = cfg.reward;
    opt.phi_lo = cfg.search.lo;
    opt.phi_hi = cfg.search.hi;
    st.norm = rl::fit_normalizer(base, ecfg, opt, cfg.norm_episodes,
                                 rng::derive(cfg.seed, "norm"));
    st.ac = rl::make_actor_critic(bldg::kObsDim, cfg.hidden, cfg.dropout,
                                  rng::derive(cfg.seed, "init"));
    bldg::BuildingEnv probe(base, ecfg, opt, rng::derive(cfg.seed, "s0"));
    const auto obs = probe.reset();
    st.base_obs.assign(obs.begin(), obs.end());
    return st;
}

RunState load_state(const fs::path& path, const TrainerConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "uedhvac-train-state" || j.value("version", 0) != 1)
        throw std::runtime_error("training state: unrecognized snapshot format");
    if (j.at("strategy").get<std::string>() != to_string(cfg.strategy))
        throw std::runtime_error("training state: snapshot strategy '" +
                                 j.at("strategy").get<std::string>() +
                                 "' does not match configured '" + to_string(cfg.strategy) + "'");

    RunState st;
    st.episode = j.at("episode").get<std::int64_t>();
    st.steps = j.at("steps").get<std::int64_t>();
    st.final_mean_reward = j.at("final_mean_reward").get<double>();
    st.metrics_lines = j.at("metrics_lines").get<std::int64_t>();
    st.levels_lines = j.at("levels_lines").get<std::int64_t>();

    const auto& bj = j.at("buffer");
    st.buffer.counter = bj.at("counter").get<std::int64_t>();
    st.buffer.phis = bj.at("phis").get<std::vector<ued::Phi>>();
    st.buffer.scores = bj.at("scores").get<std::vector<double>>();
    st.buffer.stamps = bj.at("stamps").get<std::vector<std::int64_t>>();
    if (st.buffer.phis.size() != st.buffer.scores.size() ||
        st.buffer.phis.size() != st.buffer.stamps.size())
        throw std::runtime_error("training state: buffer arrays disagree");

    st.norm.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    st.norm.stdev = j.at("normalizer").at("stdev").get<std::vector<double>>();
    st.base_obs = j.at("base_obs").get<std::vector<double>>();
    if (auto it = j.find("search_phi"); it != j.end()) st.search_phi = it->get<ued::Phi>();

    st.ac.actor = net_from_json(j.at("actor"));
    st.ac.critic = net_from_json(j.at("critic"));
    st.ac.actor_opt = adam_from_json(j.at("actor_opt"), st.ac.actor);
    st.ac.critic_opt = adam_from_json(j.at("critic_opt"), st.ac.critic);

    const auto expect =
        rl::make_actor_critic(bldg::kObsDim, cfg.hidden, cfg.dropout, rng::derive(cfg.seed, "init"));
    if (!same_shape(st.ac.actor, expect.actor) || !same_shape(st.ac.critic, expect.critic))
        throw std::runtime_error("training state: network shapes do not match the configuration");
    return st;
}

// Rewrites `path` keeping only the first `lines` lines; partial records from
// an interrupted episode disappear here.
void truncate_jsonl(const fs::path& path, std::int64_t lines) {
    if (!fs::exists(path)) {
        if (lines > 0)
            throw std::runtime_error("log file missing but snapshot expects " +
                                     std::to_string(lines) + " lines: " + path.string());
        return;
    }
    std::vector<std::string> kept;
    {
        std::ifstream in(path);
        std::string line;
        while (static_cast<std::int64_t>(kept.size()) < lines && std::getline(in, line))
            kept.push_back(line);
        if (static_cast<std::int64_t>(kept.size()) < lines)
            throw std::runtime_error("log file shorter than snapshot expects: " + path.string());
    }
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : kept) out << l << '\n';
}

// Adapter that presents the uncertainty surface in rescaled offset
// coordinates psi = phi / unit, with matching chain-rule gradients.
struct RescaledModel : ued::UncertaintyModel {
    const ued::UncertaintyModel* inner;
    ued::Phi unit;

    ued::Phi to_phi(const ued::Phi& psi) const {
        ued::Phi phi{};
        for (int v = 0; v < ou::kNumVars; ++v) phi[v] = psi[v] * unit[v];
        return phi;
    }
    double value(const ued::Phi& psi, int iter) const override {
        return inner->value(to_phi(psi), iter);
    }
    ued::Phi gradient(const ued::Phi& psi, int iter) const override {
        auto g = inner->gradient(to_phi(psi), iter);
        for (int v = 0; v < ou::kNumVars; ++v) g[v] *= unit[v];
        return g;
    }
};

// Runs the offset search in observation-sigma units: one step_size then moves
// every coordinate a comparable fraction of its weather spread instead of one
// raw unit of whatever the variable happens to be measured in (a degree of
// temperature vs a watt of solar), and the soft distance penalty weighs all
// coordinates equally. In these units the ascent direction equals the
// critic's input gradient. Bounds, the start and anchor points, and the
// returned offset stay physical.
ued::Phi sigma_scaled_search(const ued::UncertaintyModel& model, const ued::Phi& start,
                             const ued::Phi& anchor, ued::SearchConfig cfg,
                             const rl::ObsNormalizer& norm) {
    RescaledModel scaled;
    scaled.inner = &model;
    ued::Phi psi_start{}, psi_anchor{};
    const ued::SearchConfig physical = cfg;
    for (int v = 0; v < ou::kNumVars; ++v) {
        const auto uv = static_cast<std::size_t>(v);
        scaled.unit[v] = norm.stdev[uv];  // fit floors this away from zero
        cfg.lo[v] /= scaled.unit[v];
        cfg.hi[v] /= scaled.unit[v];
        psi_start[v] = start[v] / scaled.unit[v];
        psi_anchor[v] = anchor[v] / scaled.unit[v];
    }
    const auto psi = ued::active_search(scaled, psi_start, psi_anchor, cfg);
    ued::Phi phi = scaled.to_phi(psi);
    for (int v = 0; v < ou::kNumVars; ++v)
        phi[v] = std::clamp(phi[v], physical.lo[v], physical.hi[v]);  // round-trip guard
    return phi;
}

double batch_entropy(const rl::TrajectoryBatch& b, const nn::Network& actor,
                     kernels::Exec exec) {
    if (b.n == 0) return 0.0;
    std::vector<double> y(static_cast<std::size_t>(b.n) * actor.output_dim());
    kernels::batch_forward(actor, b.obs.data(), b.n, nullptr, 1.0, y.data(), exec);
    double s = 0.0;
    for (int t = 0; t < b.n; ++t) {
        const auto head = rl::decode_head(
            {y.data() + static_cast<std::size_t>(t) * actor.output_dim(),
             static_cast<std::size_t>(actor.output_dim())});
        s += rl::entropy(head);
    }
    return s / b.n;
}

}  // namespace

TrainResult run_training(const ou::WeatherTrace* base, const TrainerConfig& cfg) {
    cfg.validate();
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    RunState st = fs::exists(dir / "state.json") ? load_state(dir / "state.json", cfg)
                                                 : fresh_state(base, cfg);
    truncate_jsonl(dir / "metrics.jsonl", st.metrics_lines);
    truncate_jsonl(dir / "levels.jsonl", st.levels_lines);

    std::ofstream metrics(dir / "metrics.jsonl", std::ios::app);
    std::ofstream levels(dir / "levels.jsonl", std::ios::app);
    if (!metrics || !levels) throw std::runtime_error("cannot open log files in " + cfg.out_dir);

    ou::EnvConfig ecfg_base;
    bldg::EnvOptions opt;
    opt.dt = cfg.dt;
    opt.reward = cfg.reward;
    opt.phi_lo = cfg.search.lo;
    opt.phi_hi = cfg.search.hi;

    const ued::Phi phi0{};

    while (st.steps < cfg.total_steps) {
        const auto e = static_cast<std::uint64_t>(st.episode);
        ++st.buffer.counter;

        // pick this episode's configuration
        ued::Phi phi = phi0;
        bool replayed = false;
        int level_idx = -1;
        switch (cfg.strategy) {
            case Strategy::vanilla:
                break;
            case Strategy::dr: {
                auto rng = rng::engine(rng::derive(cfg.seed, "dr", e));
                phi = ued::domain_randomize(cfg.search.lo, cfg.search.hi, rng);
                break;
            }
            case Strategy::active_rl: {
                ued::CriticUncertainty model(&st.ac.critic, &st.norm, st.base_obs,
                                             cfg.search.dropout, cfg.search.mc_passes,
                                             rng::derive(cfg.seed, "search", e), cfg.exec);
                // Each search resumes where the previous one stopped, so the
                // ascent tracks the uncertainty frontier across episodes; only
                // the soft penalty keeps pulling toward the nominal offsets.
                phi = sigma_scaled_search(model, st.search_phi, phi0, cfg.search, st.norm);
                st.search_phi = phi;
                break;
            }
            case Strategy::plr:
            case Strategy::rplr:
            case Strategy::active_plr: {
                auto decide = rng::engine(rng::derive(cfg.seed, "decide", e));
                replayed =
                    ued::sample_replay_decision(st.buffer.size(), cfg.replay.n_plr, decide);
                if (replayed) {
                    level_idx = ued::plr_sample(st.buffer, cfg.replay, decide);
                    phi = st.buffer.phis[static_cast<std::size_t>(level_idx)];
                } else if (cfg.strategy == Strategy::active_plr) {
                    ued::CriticUncertainty model(&st.ac.critic, &st.norm, st.base_obs,
                                                 cfg.search.dropout, cfg.search.mc_passes,
                                                 rng::derive(cfg.seed, "search", e), cfg.exec);
                    phi = sigma_scaled_search(model, st.search_phi, phi0, cfg.search, st.norm);
                    st.search_phi = phi;
                } else {
                    auto rng = rng::engine(rng::derive(cfg.seed, "dr", e));
                    phi = ued::domain_randomize(cfg.search.lo, cfg.search.hi, rng);
                }
                break;
            }
        }
        if (uses_buffer(cfg.strategy) && !replayed) level_idx = st.buffer.insert(phi);

        ou::EnvConfig ecfg = ecfg_base;
        ecfg.set_phi(phi);
        rl::BuildingEnvAdapter env(
            bldg::BuildingEnv(base, ecfg, opt, rng::derive(cfg.seed, "episode", e)));
        env.reset();

        // Robust replay: configurations that were just generated still roll
        // out (the score needs trajectories) but skip the gradient update.
        const bool updates = !(cfg.strategy == Strategy::rplr && !replayed);

        double score_weighted = 0.0;
        std::int64_t ep_len = 0;
        for (std::uint64_t ci = 0;; ++ci) {
            auto batch = rl::collect_trajectories(env, st.ac, st.norm, cfg.ppo.horizon,
                                                  rng::derive(cfg.seed, "rollout", e, ci));
            if (batch.n == 0) break;
            rl::compute_gae(batch, cfg.ppo.discount, cfg.ppo.gae_lambda);

            double vloss_pre, ent;
            if (updates) {
                const auto stats = rl::ppo_update(st.ac, batch, cfg.ppo,
                                                  rng::derive(cfg.seed, "update", e, ci), cfg.exec);
                vloss_pre = stats.value_loss;
                ent = stats.entropy;
            } else {
                vloss_pre = rl::value_loss(batch, st.ac.critic, cfg.exec);
                ent = batch_entropy(batch, st.ac.actor, cfg.exec);
            }
            const double vloss_post =
                updates ? rl::value_loss(batch, st.ac.critic, cfg.exec) : vloss_pre;

            st.steps += batch.n;
            ep_len += batch.n;
            score_weighted += vloss_post * batch.n;
            st.final_mean_reward = batch.mean_reward();

            metrics << ordered_json{{"step", st.steps},
                                    {"mean_reward", batch.mean_reward()},
                                    {"value_loss", vloss_pre},
                                    {"entropy", ent}}
                           .dump()
                    << '\n';
            ++st.metrics_lines;

            if (batch.done[static_cast<std::size_t>(batch.n - 1)]) break;
        }

        const double score = ep_len > 0 ? score_weighted / static_cast<double>(ep_len) : 0.0;
        if (uses_buffer(cfg.strategy)) st.buffer.update_score(level_idx, score);

        levels << ordered_json{{"episode", st.episode},
                               {"strategy", to_string(cfg.strategy)},
                               {"phi", phi},
                               {"source", replayed ? "replay" : "generated"},
                               {"score", score}}
                      .dump()
               << '\n';
        ++st.levels_lines;

        ++st.episode;
        if (st.episode % cfg.snapshot_every == 0) {
            metrics.flush();
            levels.flush();
            write_snapshot(cfg, st);
        }
    }

    metrics.flush();
    levels.flush();
    write_snapshot(cfg, st);

    TrainResult res;
    res.episodes = st.episode;
    res.steps = st.steps;
    res.final_mean_reward = st.final_mean_reward;
    res.ac = std::move(st.ac);
    res.norm = std::move(st.norm);
    return res;
}

}  // namespace uedhvac::trainer
