#include "uedhvac/kernels.hpp"

#include <stdexcept>

#include "kernels_detail.hpp"
#include "uedhvac/rng.hpp"

namespace uedhvac::kernels {

namespace detail {

nn::DropoutMask pass_mask(const nn::Network& net, double p, std::uint64_t seed, int c) {
    auto eng = rng::engine(rng::derive(seed, "mc-pass", static_cast<std::uint64_t>(c)));
    return nn::draw_mask(net, p, eng);
}

void check_mc_args(const nn::Network& net, std::span<const double> x, double p, int passes) {
    if (passes <= 0) throw std::invalid_argument("mc passes must be positive");
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout p must lie in [0, 1)");
    if (static_cast<int>(x.size()) != net.input_dim())
        throw std::invalid_argument("input size mismatch");
}

double centered_variance(const std::vector<double>& f, int passes, int m,
                         std::vector<double>& fbar) {
    fbar.assign(m, 0.0);
    for (int c = 0; c < passes; ++c)
        for (int j = 0; j < m; ++j) fbar[j] += f[static_cast<std::size_t>(c) * m + j];
    for (int j = 0; j < m; ++j) fbar[j] /= passes;
    double acc = 0.0;
    for (int c = 0; c < passes; ++c)
        for (int j = 0; j < m; ++j) {
            const double d = f[static_cast<std::size_t>(c) * m + j] - fbar[j];
            acc += d * d;
        }
    return acc / passes;
}

}  // namespace detail

double mc_uncertainty(const nn::Network& net, std::span<const double> x, double p, int passes,
                      std::uint64_t seed, Exec exec) {
    detail::check_mc_args(net, x, p, passes);
    if (p == 0.0) return 0.0;
    return exec == Exec::serial ? serial_impl::mc_uncertainty(net, x, p, passes, seed)
                                : omp_impl::mc_uncertainty(net, x, p, passes, seed);
}

McGrad mc_uncertainty_grad(const nn::Network& net, std::span<const double> x, double p, int passes,
                           std::uint64_t seed, Exec exec) {
    detail::check_mc_args(net, x, p, passes);
    if (p == 0.0) {
        McGrad g;
        g.dinput.assign(net.input_dim(), 0.0);
        return g;
    }
    return exec == Exec::serial ? serial_impl::mc_uncertainty_grad(net, x, p, passes, seed)
                                : omp_impl::mc_uncertainty_grad(net, x, p, passes, seed);
}

void batch_forward(const nn::Network& net, const double* X, int n, const std::uint8_t* masks,
                   double scale, double* Y, Exec exec) {
    if (n < 0) throw std::invalid_argument("negative batch size");
    if (n == 0) return;
    if (exec == Exec::serial)
        serial_impl::batch_forward(net, X, n, masks, scale, Y);
    else
        omp_impl::batch_forward(net, X, n, masks, scale, Y);
}

void batch_backward_accum(const nn::Network& net, const double* X, int n,
                          const std::uint8_t* masks, double scale, const double* upstream,
                          nn::GradientBundle& out, Exec exec) {
    if (n < 0) throw std::invalid_argument("negative batch size");
    out.init_like(net);
    out.set_zero();
    if (n == 0) return;
    if (exec == Exec::serial)
        serial_impl::batch_backward_accum(net, X, n, masks, scale, upstream, out);
    else
        omp_impl::batch_backward_accum(net, X, n, masks, scale, upstream, out);
}

}  // namespace uedhvac::kernels
