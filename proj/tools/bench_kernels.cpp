// Times the OpenMP kernels against their serial reference implementations.
// The two variants are chunk-for-chunk identical by construction; this tool
// reports the speedup actually obtained on this machine.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dsnbench/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_ms(F&& fn) {
    const auto start = Clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.1f ms %10.1f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20'000'000;
#ifdef _OPENMP
    std::printf("n = %zu, omp threads = %d\n", n, omp_get_max_threads());
#else
    std::printf("n = %zu, OpenMP disabled\n", n);
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const double a = -1.03, i_min = 1.0, i_max = 30265.0;
    std::vector<double> buf(n);

    row("sample_power_law",
        time_ms([&] { dsnbench::kernels::sample_power_law_serial(buf, a, i_min, i_max, 7); }),
        time_ms([&] { dsnbench::kernels::sample_power_law(buf, a, i_min, i_max, 7); }));

    std::vector<int> lengths(n);
    row("sample_chain_lengths",
        time_ms([&] { dsnbench::kernels::sample_chain_lengths_serial(lengths, -0.7, 7); }),
        time_ms([&] { dsnbench::kernels::sample_chain_lengths(lengths, -0.7, 7); }));

    row("mc_segment_efd",
        time_ms([&] { dsnbench::kernels::mc_segment_efd_serial(300, a, i_min, i_max, n, 7); }),
        time_ms([&] { dsnbench::kernels::mc_segment_efd(300, a, i_min, i_max, n, 7); }));

    row("log_histogram",
        time_ms([&] { dsnbench::kernels::log_histogram_serial(buf, i_min, i_max, 30); }),
        time_ms([&] { dsnbench::kernels::log_histogram(buf, i_min, i_max, 30); }));

    row("ks_distance_power_law",
        time_ms([&] { dsnbench::kernels::ks_distance_power_law_serial(buf, a, i_min, i_max); }),
        time_ms([&] { dsnbench::kernels::ks_distance_power_law(buf, a, i_min, i_max); }));

    return 0;
}
