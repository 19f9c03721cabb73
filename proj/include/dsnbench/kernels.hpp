#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dsnbench::kernels {

/// Inverse CDF of the truncated power law i^a on [i_min, i_max] at u in [0,1).
/// Exact; no rejection step.
double power_law_icdf(double u, double a, double i_min, double i_max);

/// Inverse CDF of the discrete decaying-exponential chain-length law
/// (mass proportional to 10^{c l} on l = 1, 2, ...), truncated at `cap`.
int chain_length_icdf(double u, double c, int cap = 100000);

/// Batch samplers. Work is split into fixed chunks, each driven by its own
/// substream, so output is identical for the serial and OpenMP variants and
/// independent of thread count. The *_serial variants are the reference
/// implementations the tests compare against; the benchmark tool times both.
void sample_power_law(std::span<double> out, double a, double i_min, double i_max,
                      std::uint64_t seed);
void sample_power_law_serial(std::span<double> out, double a, double i_min,
                             double i_max, std::uint64_t seed);

void sample_chain_lengths(std::span<int> out, double c, std::uint64_t seed);
void sample_chain_lengths_serial(std::span<int> out, double c, std::uint64_t seed);

/// Monte Carlo estimate of E[max{I, W} - I] with I from the truncated power
/// law and W uniform on [0, h]. Chunk partial sums are reduced in chunk order,
/// so the result is bit-stable across thread counts.
double mc_segment_efd(double h, double a, double i_min, double i_max, std::size_t n,
                      std::uint64_t seed);
double mc_segment_efd_serial(double h, double a, double i_min, double i_max,
                             std::size_t n, std::uint64_t seed);

/// Histogram over logarithmically spaced bins ("bins_per_decade" bins per
/// factor of ten) spanning [lo, hi]. Values outside the span are clamped into
/// the edge bins.
std::vector<std::uint64_t> log_histogram(std::span<const double> samples, double lo,
                                         double hi, int bins_per_decade);
std::vector<std::uint64_t> log_histogram_serial(std::span<const double> samples,
                                                double lo, double hi,
                                                int bins_per_decade);
std::size_t log_histogram_bin_count(double lo, double hi, int bins_per_decade);
double log_histogram_edge(double lo, int bins_per_decade, std::size_t edge_index);

/// Kolmogorov distance between the sample set and the analytic truncated
/// power-law CDF. `samples` need not be sorted.
double ks_distance_power_law(std::span<const double> samples, double a, double i_min,
                             double i_max);
double ks_distance_power_law_serial(std::span<const double> samples, double a,
                                    double i_min, double i_max);

} // namespace dsnbench::kernels
