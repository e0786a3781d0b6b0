// Internal: the two backend implementations behind kernels.hpp. The serial
// one is the reference; the omp one must match it to floating-point
// reassociation only, and must be invariant to the thread count.
#pragma once

#include "uedhvac/kernels.hpp"

namespace uedhvac::kernels::serial_impl {

double mc_uncertainty(const nn::Network&, std::span<const double>, double p, int passes,
                      std::uint64_t seed);
McGrad mc_uncertainty_grad(const nn::Network&, std::span<const double>, double p, int passes,
                           std::uint64_t seed);
void batch_forward(const nn::Network&, const double* X, int n, const std::uint8_t* masks,
                   double scale, double* Y);
void batch_backward_accum(const nn::Network&, const double* X, int n, const std::uint8_t* masks,
                          double scale, const double* upstream, nn::GradientBundle& out);

}  // namespace uedhvac::kernels::serial_impl

namespace uedhvac::kernels::omp_impl {

double mc_uncertainty(const nn::Network&, std::span<const double>, double p, int passes,
                      std::uint64_t seed);
McGrad mc_uncertainty_grad(const nn::Network&, std::span<const double>, double p, int passes,
                           std::uint64_t seed);
void batch_forward(const nn::Network&, const double* X, int n, const std::uint8_t* masks,
                   double scale, double* Y);
void batch_backward_accum(const nn::Network&, const double* X, int n, const std::uint8_t* masks,
                          double scale, const double* upstream, nn::GradientBundle& out);

}  // namespace uedhvac::kernels::omp_impl

namespace uedhvac::kernels::detail {

// Shared between backends: pass c's mask comes from a fresh engine on the
// stream derive(seed, "mc-pass", c), so phase 2 can re-draw it exactly.
nn::DropoutMask pass_mask(const nn::Network& net, double p, std::uint64_t seed, int c);

void check_mc_args(const nn::Network& net, std::span<const double> x, double p, int passes);

// Centered statistic from the stacked pass outputs (passes x m, pass-major).
double centered_variance(const std::vector<double>& f, int passes, int m,
                         std::vector<double>& fbar);

}  // namespace uedhvac::kernels::detail
