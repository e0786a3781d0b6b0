// Batched network evaluation and Monte-Carlo dropout statistics. Every entry
// point exists twice: a plain serial reference and an OpenMP version that
// decomposes work into a fixed number of chunks combined in chunk order, so
// parallel results do not depend on the thread count.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uedhvac/nn.hpp"

namespace uedhvac::kernels {

enum class Exec { serial, parallel };

// Mean-of-squares minus square-of-mean of the network output over `passes`
// dropout passes (summed across output coordinates), computed in the
// algebraically equal centered form so it cannot go negative. The divisor is
// `passes`, not passes-1. Pass c draws its mask from derive(seed, "mc-pass", c)
// and runs with scale 1, p == 0 or passes == 1 give exactly 0.
double mc_uncertainty(const nn::Network& net, std::span<const double> x, double p, int passes,
                      std::uint64_t seed, Exec exec);

struct McGrad {
    double value = 0.0;
    std::vector<double> dinput;
};

// Same statistic plus its exact input gradient (2/C) * sum_c (f_c - fbar)^T J_c,
// assembled by re-running each pass with upstream (2/C)(f_c - fbar) and adding
// the per-pass input gradients in pass order.
McGrad mc_uncertainty_grad(const nn::Network& net, std::span<const double> x, double p, int passes,
                           std::uint64_t seed, Exec exec);

// X is row-major n x input_dim, Y row-major n x output_dim. `masks`, when
// non-null, holds one row of hidden_units() bytes per sample.
void batch_forward(const nn::Network& net, const double* X, int n, const std::uint8_t* masks,
                   double scale, double* Y, Exec exec);

// Sum over samples of the per-sample parameter/input gradient with per-sample
// upstream rows (n x output_dim). dinput in `out` ends up as the sum as well.
void batch_backward_accum(const nn::Network& net, const double* X, int n,
                          const std::uint8_t* masks, double scale, const double* upstream,
                          nn::GradientBundle& out, Exec exec);

namespace detail {

// Chunk c of `kChunks` covers [begin, end) of n items; empty for trailing
// chunks when n < kChunks.
inline constexpr int kChunks = 16;
inline std::pair<int, int> chunk_bounds(int n, int c) {
    const int base = n / kChunks, rem = n % kChunks;
    const int begin = c * base + (c < rem ? c : rem);
    return {begin, begin + base + (c < rem ? 1 : 0)};
}

}  // namespace detail

}  // namespace uedhvac::kernels
