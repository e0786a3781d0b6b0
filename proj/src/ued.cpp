#include "uedhvac/ued.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "uedhvac/rng.hpp"

namespace uedhvac::ued {

void PLRConfig::validate() const {
    if (!(rho_staleness >= 0.0 && rho_staleness <= 1.0))
        throw std::invalid_argument("replay: rho_staleness must be in [0, 1]");
    if (!(beta_temperature > 0.0))
        throw std::invalid_argument("replay: beta_temperature must be > 0");
    if (n_plr < 1) throw std::invalid_argument("replay: n_plr must be >= 1");
}

int LevelBuffer::insert(const Phi& phi) {
    phis.push_back(phi);
    scores.push_back(0.0);
    stamps.push_back(0);
    return size() - 1;
}

void LevelBuffer::update_score(int i, double score) {
    if (i < 0 || i >= size()) throw std::out_of_range("level buffer: bad index");
    if (!(score >= 0.0)) throw std::invalid_argument("level buffer: score must be >= 0");
    scores[static_cast<std::size_t>(i)] = score;
}

void LevelBuffer::touch(int i) {
    if (i < 0 || i >= size()) throw std::out_of_range("level buffer: bad index");
    stamps[static_cast<std::size_t>(i)] = counter;
}

bool sample_replay_decision(int buffer_size, int n_plr, std::mt19937_64& rng) {
    if (n_plr < 1) throw std::invalid_argument("replay: n_plr must be >= 1");
    const double p = std::min(1.0, static_cast<double>(buffer_size) / n_plr);
    return std::bernoulli_distribution(p)(rng);
}

std::vector<double> plr_probabilities(const LevelBuffer& buf, const PLRConfig& cfg) {
    cfg.validate();
    const int n = buf.size();
    if (n == 0) throw std::invalid_argument("replay: empty buffer");
    const auto un = static_cast<std::size_t>(n);

    // Rank part: order by score descending, earlier index wins ties, then
    // weight by (1/rank)^(1/beta).
    std::vector<int> order(un);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
        return buf.scores[static_cast<std::size_t>(l)] > buf.scores[static_cast<std::size_t>(r)];
    });
    std::vector<double> rank_p(un, 0.0);
    double rank_sum = 0.0;
    for (int pos = 0; pos < n; ++pos) {
        const double w = std::pow(1.0 / (pos + 1.0), 1.0 / cfg.beta_temperature);
        rank_p[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = w;
        rank_sum += w;
    }
    for (auto& w : rank_p) w /= rank_sum;

    // Staleness part: proportional to the age since last replay, uniform when
    // every level is fresh.
    std::vector<double> stale_p(un, 0.0);
    double stale_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double age = static_cast<double>(buf.counter - buf.stamps[static_cast<std::size_t>(i)]);
        stale_p[static_cast<std::size_t>(i)] = age;
        stale_sum += age;
    }
    if (stale_sum > 0.0) {
        for (auto& w : stale_p) w /= stale_sum;
    } else {
        std::fill(stale_p.begin(), stale_p.end(), 1.0 / n);
    }

    std::vector<double> p(un);
    for (std::size_t i = 0; i < un; ++i)
        p[i] = (1.0 - cfg.rho_staleness) * rank_p[i] + cfg.rho_staleness * stale_p[i];
    return p;
}

int plr_sample(LevelBuffer& buf, const PLRConfig& cfg, std::mt19937_64& rng) {
    const auto p = plr_probabilities(buf, cfg);
    std::discrete_distribution<int> dist(p.begin(), p.end());
    const int i = dist(rng);
    buf.touch(i);
    return i;
}

Phi domain_randomize(const Phi& a, const Phi& b, std::mt19937_64& rng) {
    Phi phi{};
    for (int v = 0; v < ou::kNumVars; ++v) {
        if (!(a[v] <= b[v])) throw std::invalid_argument("randomize: bounds must satisfy a <= b");
        phi[v] = std::uniform_real_distribution<double>(a[v], b[v])(rng);
    }
    return phi;
}

void SearchConfig::validate() const {
    if (n_iters < 0) throw std::invalid_argument("search: n_iters must be >= 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("search: step_size must be > 0");
    if (!(soft_weight >= 0.0)) throw std::invalid_argument("search: soft_weight must be >= 0");
    if (mc_passes < 1) throw std::invalid_argument("search: mc_passes must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw std::invalid_argument("search: dropout must be in [0, 1)");
    for (int v = 0; v < ou::kNumVars; ++v)
        if (!(lo[v] < hi[v])) throw std::invalid_argument("search: bounds must satisfy lo < hi");
}

namespace {

// Distance part of the ascent gradient: subtracts gamma * d dist(phi, phi0)/d phi.
Phi objective_gradient(const UncertaintyModel& model, const Phi& phi, const Phi& phi0,
                       double gamma, bool squared, int iter) {
    Phi g = model.gradient(phi, iter);
    if (gamma == 0.0) return g;
    if (squared) {
        for (int v = 0; v < ou::kNumVars; ++v) g[v] -= gamma * 2.0 * (phi[v] - phi0[v]);
        return g;
    }
    double d2 = 0.0;
    for (int v = 0; v < ou::kNumVars; ++v) d2 += (phi[v] - phi0[v]) * (phi[v] - phi0[v]);
    const double d = std::sqrt(d2);
    if (d > 0.0)
        for (int v = 0; v < ou::kNumVars; ++v) g[v] -= gamma * (phi[v] - phi0[v]) / d;
    return g;
}

double adam_dir(double g, double& m, double& v, std::int64_t t) {
    m = nn::kAdamBeta1 * m + (1.0 - nn::kAdamBeta1) * g;
    v = nn::kAdamBeta2 * v + (1.0 - nn::kAdamBeta2) * g * g;
    const double mh = m / (1.0 - std::pow(nn::kAdamBeta1, static_cast<double>(t)));
    const double vh = v / (1.0 - std::pow(nn::kAdamBeta2, static_cast<double>(t)));
    return mh / (std::sqrt(vh) + nn::kAdamEps);
}

constexpr int kJoint = 3 * ou::kNumVars;

// F = [-(grad O + lambda - nu), phi - a, b - phi]; false if any entry is
// non-finite.
bool saddle_field(const Phi& phi, const MultiplierState& mult,
                  const std::function<Phi(const Phi&)>& grad_fn, const Phi& a, const Phi& b,
                  std::array<double, kJoint>& F) {
    const Phi g = grad_fn(phi);
    for (int v = 0; v < ou::kNumVars; ++v) {
        F[v] = -(g[v] + mult.lambda[v] - mult.nu[v]);
        F[ou::kNumVars + v] = phi[v] - a[v];
        F[2 * ou::kNumVars + v] = b[v] - phi[v];
    }
    for (const double f : F)
        if (!std::isfinite(f)) return false;
    return true;
}

void apply_step(const Phi& phi, const MultiplierState& mult, const std::array<double, kJoint>& F,
                ExtraAdamState& st, double eta, const Phi& a, const Phi& b, Phi& phi_out,
                MultiplierState& mult_out) {
    ++st.t;
    for (int v = 0; v < ou::kNumVars; ++v) {
        phi_out[v] = std::clamp(phi[v] - eta * adam_dir(F[v], st.m_phi[v], st.v_phi[v], st.t),
                                a[v], b[v]);
        mult_out.lambda[v] = std::max(
            0.0, mult.lambda[v] - eta * adam_dir(F[ou::kNumVars + v], st.m_lambda[v],
                                                 st.v_lambda[v], st.t));
        mult_out.nu[v] = std::max(
            0.0, mult.nu[v] - eta * adam_dir(F[2 * ou::kNumVars + v], st.m_nu[v], st.v_nu[v],
                                             st.t));
    }
}

}  // namespace

double objective(const UncertaintyModel& model, const Phi& phi, const Phi& phi0, double gamma,
                 bool squared, int iter) {
    double d2 = 0.0;
    for (int v = 0; v < ou::kNumVars; ++v) d2 += (phi[v] - phi0[v]) * (phi[v] - phi0[v]);
    const double dist = squared ? d2 : std::sqrt(d2);
    return model.value(phi, iter) - gamma * dist;
}

bool extragradient_step(Phi& phi, MultiplierState& mult,
                        const std::function<Phi(const Phi&)>& grad_fn, ExtraAdamState& state,
                        double eta, const Phi& a, const Phi& b) {
    std::array<double, kJoint> F{};
    if (!saddle_field(phi, mult, grad_fn, a, b, F)) return false;

    Phi phi_half{};
    MultiplierState mult_half{};
    apply_step(phi, mult, F, state, eta, a, b, phi_half, mult_half);

    if (!saddle_field(phi_half, mult_half, grad_fn, a, b, F)) return false;

    Phi phi_next{};
    MultiplierState mult_next{};
    apply_step(phi, mult, F, state, eta, a, b, phi_next, mult_next);
    phi = phi_next;
    mult = mult_next;
    return true;
}

Phi active_search(const UncertaintyModel& model, const Phi& phi0, const SearchConfig& cfg) {
    return active_search(model, phi0, phi0, cfg);
}

Phi active_search(const UncertaintyModel& model, const Phi& start, const Phi& anchor,
                  const SearchConfig& cfg) {
    cfg.validate();
    Phi phi = start;
    for (int v = 0; v < ou::kNumVars; ++v) phi[v] = std::clamp(phi[v], cfg.lo[v], cfg.hi[v]);
    MultiplierState mult{};
    ExtraAdamState state{};
    for (int i = 0; i < cfg.n_iters; ++i) {
        auto grad_fn = [&](const Phi& p) {
            return objective_gradient(model, p, anchor, cfg.soft_weight, cfg.squared_distance, i);
        };
        if (!extragradient_step(phi, mult, grad_fn, state, cfg.step_size, cfg.lo, cfg.hi)) break;
    }
    return phi;
}

CriticUncertainty::CriticUncertainty(const nn::Network* critic, const rl::ObsNormalizer* norm,
                                     std::vector<double> base_obs, double dropout, int passes,
                                     std::uint64_t seed, kernels::Exec exec)
    : critic_(critic),
      norm_(norm),
      base_obs_(std::move(base_obs)),
      dropout_(dropout),
      passes_(passes),
      seed_(seed),
      exec_(exec) {
    if (static_cast<int>(base_obs_.size()) != critic_->input_dim() ||
        norm_->dim() != critic_->input_dim())
        throw std::invalid_argument("uncertainty: observation/normalizer/critic dims disagree");
}

std::vector<double> CriticUncertainty::assemble(const Phi& phi,
                                                std::array<bool, ou::kNumVars>& live) const {
    std::vector<double> obs = base_obs_;
    for (int v = 0; v < ou::kNumVars; ++v) {
        const double raw = base_obs_[static_cast<std::size_t>(v)] + phi[v];
        obs[static_cast<std::size_t>(v)] = std::clamp(raw, ou::kValueLo[v], ou::kValueHi[v]);
        // Dead only when pushed strictly outside: at the bound itself the
        // clamp is the identity from the feasible side, so the coordinate
        // still responds to search steps (a midnight start sits exactly on
        // the solar floor and must stay searchable upward).
        live[static_cast<std::size_t>(v)] = raw >= ou::kValueLo[v] && raw <= ou::kValueHi[v];
    }
    return obs;
}

double CriticUncertainty::value(const Phi& phi, int iter) const {
    std::array<bool, ou::kNumVars> live{};
    const auto obs = assemble(phi, live);
    std::vector<double> nobs(obs.size());
    norm_->normalize(obs, nobs);
    return kernels::mc_uncertainty(*critic_, nobs, dropout_, passes_,
                                   rng::derive(seed_, "search-iter", static_cast<std::uint64_t>(iter)),
                                   exec_);
}

Phi CriticUncertainty::gradient(const Phi& phi, int iter) const {
    std::array<bool, ou::kNumVars> live{};
    const auto obs = assemble(phi, live);
    std::vector<double> nobs(obs.size());
    norm_->normalize(obs, nobs);
    const auto mcg = kernels::mc_uncertainty_grad(
        *critic_, nobs, dropout_, passes_,
        rng::derive(seed_, "search-iter", static_cast<std::uint64_t>(iter)), exec_);
    Phi g{};
    for (int v = 0; v < ou::kNumVars; ++v) {
        const auto uv = static_cast<std::size_t>(v);
        const double z = (obs[uv] - norm_->mean[uv]) / norm_->stdev[uv];
        const bool clipped = z <= -10.0 || z >= 10.0;
        g[v] = (live[uv] && !clipped) ? mcg.dinput[uv] / norm_->stdev[uv] : 0.0;
    }
    return g;
}

}  // namespace uedhvac::ued
