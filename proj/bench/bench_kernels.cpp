// Times the serial kernel backend against the OpenMP one on the batched entry
// points. Map-style ops must match bitwise. Reductions combine fixed chunks in
// chunk order, a different summation order than the serial reference; entries
// that nearly cancel amplify that reordering error with the batch size, so
// reductions are held to a 1e-10 relative tolerance here (the unit tests pin
// 1e-12 at their smaller batch).
//
//   bench_kernels [batch] [passes] [repeats]
#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <algorithm>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "uedhvac/kernels.hpp"
#include "uedhvac/nn.hpp"
#include "uedhvac/rng.hpp"

using namespace uedhvac;
using kernels::Exec;

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int repeats) {
    // One warm-up call, then the best of `repeats` timed runs.
    fn();
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = a.size() == b.size() ? 0.0 : 1e300;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        worst = std::max(worst, rel_err(a[i], b[i]));
    return worst;
}

void report(const char* name, double serial_ms, double parallel_ms, bool ok,
            const char* match_note) {
    std::printf("%-22s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                ok ? match_note : "RESULTS DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 8192;
    const int passes = argc > 2 ? std::atoi(argv[2]) : 64;
    const int repeats = argc > 3 ? std::atoi(argv[3]) : 5;
    if (n < 1 || passes < 1 || repeats < 1) {
        std::fprintf(stderr, "usage: bench_kernels [batch >= 1] [passes >= 1] [repeats >= 1]\n");
        return 2;
    }

#ifdef _OPENMP
    std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp: the parallel path runs serially\n");
#endif
    std::printf("batch %d, mc passes %d, best of %d runs\n\n", n, passes, repeats);

    const int in_dim = 8, out_dim = 4;
    const auto net = nn::make_network(in_dim, {64, 64}, out_dim, 0.1, 42);

    std::mt19937_64 gen(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> X(static_cast<std::size_t>(n) * in_dim);
    for (double& x : X) x = gauss(gen);
    std::vector<double> upstream(static_cast<std::size_t>(n) * out_dim);
    for (double& u : upstream) u = gauss(gen);

    bool all_identical = true;

    {
        std::vector<double> ys(static_cast<std::size_t>(n) * out_dim);
        std::vector<double> yp(ys.size());
        const double ts = time_ms(
            [&] { kernels::batch_forward(net, X.data(), n, nullptr, 1.0, ys.data(), Exec::serial); },
            repeats);
        const double tp = time_ms(
            [&] { kernels::batch_forward(net, X.data(), n, nullptr, 1.0, yp.data(), Exec::parallel); },
            repeats);
        kernels::batch_forward(net, X.data(), n, nullptr, 1.0, ys.data(), Exec::serial);
        kernels::batch_forward(net, X.data(), n, nullptr, 1.0, yp.data(), Exec::parallel);
        const bool same = ys == yp;
        all_identical = all_identical && same;
        report("batch_forward", ts, tp, same, "bitwise identical");
    }

    {
        nn::GradientBundle gs, gp;
        gs.init_like(net);
        gp.init_like(net);
        const double ts = time_ms(
            [&] {
                gs.set_zero();
                kernels::batch_backward_accum(net, X.data(), n, nullptr, 1.0, upstream.data(), gs,
                                              Exec::serial);
            },
            repeats);
        const double tp = time_ms(
            [&] {
                gp.set_zero();
                kernels::batch_backward_accum(net, X.data(), n, nullptr, 1.0, upstream.data(), gp,
                                              Exec::parallel);
            },
            repeats);
        double worst = max_rel_err(gs.dinput, gp.dinput);
        for (std::size_t l = 0; l < gs.dw.size(); ++l) {
            worst = std::max(worst, max_rel_err(gs.dw[l], gp.dw[l]));
            worst = std::max(worst, max_rel_err(gs.db[l], gp.db[l]));
        }
        const bool ok = worst < 1e-10;
        all_identical = all_identical && ok;
        report("batch_backward_accum", ts, tp, ok, "within 1e-10 relative");
    }

    {
        const std::vector<double> x0(X.begin(), X.begin() + in_dim);
        double us = 0.0, up = 0.0;
        const double ts = time_ms(
            [&] { us = kernels::mc_uncertainty(net, x0, 0.1, passes, 11, Exec::serial); }, repeats);
        const double tp = time_ms(
            [&] { up = kernels::mc_uncertainty(net, x0, 0.1, passes, 11, Exec::parallel); },
            repeats);
        const bool ok = rel_err(us, up) < 1e-10;
        all_identical = all_identical && ok;
        report("mc_uncertainty", ts, tp, ok, "within 1e-10 relative");
    }

    {
        const std::vector<double> x0(X.begin(), X.begin() + in_dim);
        kernels::McGrad gs, gp;
        const double ts = time_ms(
            [&] { gs = kernels::mc_uncertainty_grad(net, x0, 0.1, passes, 11, Exec::serial); },
            repeats);
        const double tp = time_ms(
            [&] { gp = kernels::mc_uncertainty_grad(net, x0, 0.1, passes, 11, Exec::parallel); },
            repeats);
        const bool ok = rel_err(gs.value, gp.value) < 1e-10 &&
                        max_rel_err(gs.dinput, gp.dinput) < 1e-10;
        all_identical = all_identical && ok;
        report("mc_uncertainty_grad", ts, tp, ok, "within 1e-10 relative");
    }

    if (!all_identical) {
        std::fprintf(stderr, "\nbackend mismatch: the OpenMP kernels are not reproducing the "
                             "serial reference\n");
        return 1;
    }
    return 0;
}
