// Minimal dense network with unit dropout: forward, exact reverse-mode
// gradients for parameters and inputs, Adam, and a versioned checkpoint
// format (JSON header + little-endian float32 payload).
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace uedhvac::nn {

struct Layer {
    int in = 0, out = 0;
    std::vector<double> w;  // row-major [in][out]
    std::vector<double> b;  // [out]
};

// Hidden layers are rectified then masked; the final layer is identity and
// never masked. dropout_p is the training-time drop probability.
struct Network {
    std::vector<Layer> layers;
    double dropout_p = 0.0;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    int hidden_units() const {
        int n = 0;
        for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l].out;
        return n;
    }
    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }
};

// Fan-in-scaled uniform init, weights and biases in U(-1/sqrt(in), 1/sqrt(in)).
Network make_network(int input, const std::vector<int>& hidden, int output, double dropout_p,
                     std::uint64_t seed);

// One byte per hidden unit, layer 0's units first. 1 = keep.
struct DropoutMask {
    std::vector<std::uint8_t> keep;
};

DropoutMask draw_mask(const Network& net, double p, std::mt19937_64& rng);
DropoutMask full_mask(const Network& net);

struct Workspace {
    std::vector<std::vector<double>> z;  // pre-activations
    std::vector<std::vector<double>> h;  // post-activation, post-mask
};

// mask == nullptr means identity. `scale` multiplies kept hidden activations:
// 1 for raw masked passes (the uncertainty path), 1/(1-p) for training-mode
// dropout. Returns the output via ws.h.back().
void forward(const Network& net, std::span<const double> x, const std::uint8_t* mask,
             double scale, Workspace& ws);
std::vector<double> forward(const Network& net, std::span<const double> x,
                            const std::uint8_t* mask = nullptr, double scale = 1.0);

struct GradientBundle {
    std::vector<std::vector<double>> dw, db;
    std::vector<double> dinput;

    void init_like(const Network& net);
    void set_zero();
    void add_scaled(const GradientBundle& other, double s);
};

// Exact reverse-mode pass; requires ws from a forward with identical
// x/mask/scale. Accumulates into `out` when accumulate is true.
void backward(const Network& net, std::span<const double> x, const std::uint8_t* mask,
              double scale, const Workspace& ws, std::span<const double> upstream,
              GradientBundle& out, bool accumulate);

struct AdamState {
    std::vector<std::vector<double>> mw, vw, mb, vb;
    std::int64_t t = 0;

    void init_like(const Network& net);
};

inline constexpr double kAdamBeta1 = 0.9, kAdamBeta2 = 0.999, kAdamEps = 1e-8;

// Standard bias-corrected descent step along `grads`.
void adam_update(Network& net, const GradientBundle& grads, AdamState& state, double lr,
                 double beta1 = kAdamBeta1, double beta2 = kAdamBeta2, double eps = kAdamEps);

// Checkpoint: one JSON header line with a shape manifest, then flat
// little-endian float32 arrays (w then b per layer). Load rejects any
// manifest mismatch. `extra` rides along in the header untouched.
void save_network(const Network& net, const std::string& path,
                  const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

struct LoadedNetwork {
    Network net;
    nlohmann::json extra;
};
LoadedNetwork load_network(const std::string& path);

}  // namespace uedhvac::nn
