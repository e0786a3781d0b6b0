// Parallel backend. Independent items (passes, samples) fill preallocated
// slots; reductions run over detail::kChunks fixed chunks whose partials are
// combined serially in chunk order, so results match for any thread count.
#include "kernels_detail.hpp"

namespace uedhvac::kernels::omp_impl {

double mc_uncertainty(const nn::Network& net, std::span<const double> x, double p, int passes,
                      std::uint64_t seed) {
    const int m = net.output_dim();
    std::vector<double> f(static_cast<std::size_t>(passes) * m);
#pragma omp parallel
    {
        nn::Workspace ws;
#pragma omp for schedule(static)
        for (int c = 0; c < passes; ++c) {
            const auto mask = detail::pass_mask(net, p, seed, c);
            nn::forward(net, x, mask.keep.data(), 1.0, ws);
            for (int j = 0; j < m; ++j) f[static_cast<std::size_t>(c) * m + j] = ws.h.back()[j];
        }
    }
    std::vector<double> fbar;
    return detail::centered_variance(f, passes, m, fbar);
}

McGrad mc_uncertainty_grad(const nn::Network& net, std::span<const double> x, double p, int passes,
                           std::uint64_t seed) {
    const int m = net.output_dim(), in = net.input_dim();
    std::vector<double> f(static_cast<std::size_t>(passes) * m);
#pragma omp parallel
    {
        nn::Workspace ws;
#pragma omp for schedule(static)
        for (int c = 0; c < passes; ++c) {
            const auto mask = detail::pass_mask(net, p, seed, c);
            nn::forward(net, x, mask.keep.data(), 1.0, ws);
            for (int j = 0; j < m; ++j) f[static_cast<std::size_t>(c) * m + j] = ws.h.back()[j];
        }
    }
    McGrad out;
    std::vector<double> fbar;
    out.value = detail::centered_variance(f, passes, m, fbar);
    out.dinput.assign(in, 0.0);

    std::vector<double> dins(static_cast<std::size_t>(passes) * in);
#pragma omp parallel
    {
        nn::Workspace ws;
        nn::GradientBundle g;
        std::vector<double> up(m);
#pragma omp for schedule(static)
        for (int c = 0; c < passes; ++c) {
            const auto mask = detail::pass_mask(net, p, seed, c);
            nn::forward(net, x, mask.keep.data(), 1.0, ws);
            for (int j = 0; j < m; ++j)
                up[j] = 2.0 / passes * (f[static_cast<std::size_t>(c) * m + j] - fbar[j]);
            nn::backward(net, x, mask.keep.data(), 1.0, ws, up, g, false);
            for (int i = 0; i < in; ++i) dins[static_cast<std::size_t>(c) * in + i] = g.dinput[i];
        }
    }
    for (int c = 0; c < passes; ++c)
        for (int i = 0; i < in; ++i) out.dinput[i] += dins[static_cast<std::size_t>(c) * in + i];
    return out;
}

void batch_forward(const nn::Network& net, const double* X, int n, const std::uint8_t* masks,
                   double scale, double* Y) {
    const int in = net.input_dim(), out = net.output_dim(), hu = net.hidden_units();
#pragma omp parallel
    {
        nn::Workspace ws;
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            const std::uint8_t* mask = masks ? masks + static_cast<std::size_t>(i) * hu : nullptr;
            nn::forward(net, {X + static_cast<std::size_t>(i) * in, static_cast<std::size_t>(in)},
                        mask, scale, ws);
            for (int j = 0; j < out; ++j)
                Y[static_cast<std::size_t>(i) * out + j] = ws.h.back()[j];
        }
    }
}

void batch_backward_accum(const nn::Network& net, const double* X, int n,
                          const std::uint8_t* masks, double scale, const double* upstream,
                          nn::GradientBundle& out) {
    const int in = net.input_dim(), m = net.output_dim(), hu = net.hidden_units();
    std::vector<nn::GradientBundle> parts(detail::kChunks);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < detail::kChunks; ++c) {
        auto [lo, hi] = detail::chunk_bounds(n, c);
        if (lo >= hi) continue;
        parts[c].init_like(net);
        nn::Workspace ws;
        for (int i = lo; i < hi; ++i) {
            const std::uint8_t* mask = masks ? masks + static_cast<std::size_t>(i) * hu : nullptr;
            std::span<const double> xi{X + static_cast<std::size_t>(i) * in,
                                       static_cast<std::size_t>(in)};
            nn::forward(net, xi, mask, scale, ws);
            nn::backward(net, xi, mask, scale, ws,
                         {upstream + static_cast<std::size_t>(i) * m, static_cast<std::size_t>(m)},
                         parts[c], true);
        }
    }
    for (int c = 0; c < detail::kChunks; ++c)
        if (!parts[c].dw.empty()) out.add_scaled(parts[c], 1.0);
}

}  // namespace uedhvac::kernels::omp_impl
