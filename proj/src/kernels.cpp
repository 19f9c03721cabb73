#include "dsnbench/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "dsnbench/error.hpp"
#include "dsnbench/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsnbench::kernels {

namespace {

constexpr std::size_t kChunk = 1u << 16;

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

double power_cdf(double x, double a, double i_min, double i_max) {
    if (x <= i_min) return 0.0;
    if (x >= i_max) return 1.0;
    if (a == -1.0) return std::log(x / i_min) / std::log(i_max / i_min);
    const double e = a + 1.0;
    return (std::pow(x, e) - std::pow(i_min, e)) /
           (std::pow(i_max, e) - std::pow(i_min, e));
}

void check_power_params(double a, double i_min, double i_max) {
    if (!(i_min > 0.0) || !(i_min < i_max))
        throw Error("power law: need 0 < i_min < i_max");
    (void)a;
}

} // namespace

double power_law_icdf(double u, double a, double i_min, double i_max) {
    if (a == -1.0) return i_min * std::exp(u * std::log(i_max / i_min));
    const double e = a + 1.0;
    const double lo = std::pow(i_min, e);
    const double hi = std::pow(i_max, e);
    return std::pow(lo + u * (hi - lo), 1.0 / e);
}

int chain_length_icdf(double u, double c, int cap) {
    if (!(c < 0.0)) throw Error("chain length law: slope c must be negative");
    const double denom = c * std::log(10.0);
    const double l = 1.0 + std::floor(std::log1p(-u) / denom);
    if (l >= static_cast<double>(cap)) return cap;
    return static_cast<int>(l);
}

void sample_power_law_serial(std::span<double> out, double a, double i_min,
                             double i_max, std::uint64_t seed) {
    check_power_params(a, i_min, i_max);
    const std::size_t chunks = chunk_count(out.size());
    for (std::size_t c = 0; c < chunks; ++c) {
        Rng rng(substream(seed, c));
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(out.size(), begin + kChunk);
        for (std::size_t i = begin; i < end; ++i)
            out[i] = power_law_icdf(rng.uniform01(), a, i_min, i_max);
    }
}

void sample_power_law(std::span<double> out, double a, double i_min, double i_max,
                      std::uint64_t seed) {
    check_power_params(a, i_min, i_max);
    const std::size_t chunks = chunk_count(out.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < chunks; ++c) {
        Rng rng(substream(seed, c));
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(out.size(), begin + kChunk);
        for (std::size_t i = begin; i < end; ++i)
            out[i] = power_law_icdf(rng.uniform01(), a, i_min, i_max);
    }
}

void sample_chain_lengths_serial(std::span<int> out, double c, std::uint64_t seed) {
    const std::size_t chunks = chunk_count(out.size());
    for (std::size_t ch = 0; ch < chunks; ++ch) {
        Rng rng(substream(seed, ch));
        const std::size_t begin = ch * kChunk;
        const std::size_t end = std::min(out.size(), begin + kChunk);
        for (std::size_t i = begin; i < end; ++i)
            out[i] = chain_length_icdf(rng.uniform01(), c);
    }
}

void sample_chain_lengths(std::span<int> out, double c, std::uint64_t seed) {
    const std::size_t chunks = chunk_count(out.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t ch = 0; ch < chunks; ++ch) {
        Rng rng(substream(seed, ch));
        const std::size_t begin = ch * kChunk;
        const std::size_t end = std::min(out.size(), begin + kChunk);
        for (std::size_t i = begin; i < end; ++i)
            out[i] = chain_length_icdf(rng.uniform01(), c);
    }
}

namespace {

double mc_chunk(double h, double a, double i_min, double i_max, std::size_t begin,
                std::size_t end, std::uint64_t seed, std::size_t chunk_index) {
    Rng rng(substream(seed, chunk_index));
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        const double intrinsic = power_law_icdf(rng.uniform01(), a, i_min, i_max);
        const double wait = rng.uniform01() * h;
        acc += std::max(intrinsic, wait) - intrinsic;
    }
    return acc;
}

} // namespace

double mc_segment_efd_serial(double h, double a, double i_min, double i_max,
                             std::size_t n, std::uint64_t seed) {
    if (!(h > 0.0)) throw Error("mc_segment_efd: h must be positive");
    check_power_params(a, i_min, i_max);
    if (n == 0) throw Error("mc_segment_efd: need at least one sample");
    const std::size_t chunks = chunk_count(n);
    std::vector<double> partial(chunks);
    for (std::size_t c = 0; c < chunks; ++c)
        partial[c] = mc_chunk(h, a, i_min, i_max, c * kChunk,
                              std::min(n, (c + 1) * kChunk), seed, c);
    double total = 0.0;
    for (double p : partial) total += p; // fixed order: bit-stable
    return total / static_cast<double>(n);
}

double mc_segment_efd(double h, double a, double i_min, double i_max, std::size_t n,
                      std::uint64_t seed) {
    if (!(h > 0.0)) throw Error("mc_segment_efd: h must be positive");
    check_power_params(a, i_min, i_max);
    if (n == 0) throw Error("mc_segment_efd: need at least one sample");
    const std::size_t chunks = chunk_count(n);
    std::vector<double> partial(chunks);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < chunks; ++c)
        partial[c] = mc_chunk(h, a, i_min, i_max, c * kChunk,
                              std::min(n, (c + 1) * kChunk), seed, c);
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(n);
}

std::size_t log_histogram_bin_count(double lo, double hi, int bins_per_decade) {
    if (!(lo > 0.0) || !(lo < hi)) throw Error("log_histogram: need 0 < lo < hi");
    if (bins_per_decade <= 0) throw Error("log_histogram: bins_per_decade must be > 0");
    return static_cast<std::size_t>(
        std::ceil(std::log10(hi / lo) * bins_per_decade - 1e-9));
}

double log_histogram_edge(double lo, int bins_per_decade, std::size_t edge_index) {
    return lo * std::pow(10.0, static_cast<double>(edge_index) / bins_per_decade);
}

namespace {

std::size_t bin_of(double v, double lo, int bpd, std::size_t nbins) {
    if (!(v > 0.0)) return 0;
    double b = std::floor(std::log10(v / lo) * bpd);
    if (b < 0) return 0;
    if (b >= static_cast<double>(nbins)) return nbins - 1;
    return static_cast<std::size_t>(b);
}

} // namespace

std::vector<std::uint64_t> log_histogram_serial(std::span<const double> samples,
                                                double lo, double hi,
                                                int bins_per_decade) {
    const std::size_t nbins = log_histogram_bin_count(lo, hi, bins_per_decade);
    std::vector<std::uint64_t> counts(nbins, 0);
    for (double v : samples) ++counts[bin_of(v, lo, bins_per_decade, nbins)];
    return counts;
}

std::vector<std::uint64_t> log_histogram(std::span<const double> samples, double lo,
                                         double hi, int bins_per_decade) {
    const std::size_t nbins = log_histogram_bin_count(lo, hi, bins_per_decade);
    std::vector<std::uint64_t> counts(nbins, 0);
#pragma omp parallel
    {
        std::vector<std::uint64_t> local(nbins, 0);
#pragma omp for nowait
        for (std::size_t i = 0; i < samples.size(); ++i)
            ++local[bin_of(samples[i], lo, bins_per_decade, nbins)];
#pragma omp critical
        for (std::size_t b = 0; b < nbins; ++b) counts[b] += local[b];
    }
    return counts;
}

double ks_distance_power_law_serial(std::span<const double> samples, double a,
                                    double i_min, double i_max) {
    check_power_params(a, i_min, i_max);
    if (samples.empty()) throw Error("ks_distance: empty sample set");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double dist = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = power_cdf(sorted[i], a, i_min, i_max);
        dist = std::max(dist, std::abs(f - static_cast<double>(i) / n));
        dist = std::max(dist, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return dist;
}

double ks_distance_power_law(std::span<const double> samples, double a, double i_min,
                             double i_max) {
    check_power_params(a, i_min, i_max);
    if (samples.empty()) throw Error("ks_distance: empty sample set");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double dist = 0.0;
#pragma omp parallel for reduction(max : dist) schedule(static)
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = power_cdf(sorted[i], a, i_min, i_max);
        dist = std::max(dist, std::abs(f - static_cast<double>(i) / n));
        dist = std::max(dist, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return dist;
}

} // namespace dsnbench::kernels
