#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsnbench/kernels.hpp"
#include "dsnbench/rng.hpp"

using namespace dsnbench;
namespace k = dsnbench::kernels;

TEST_CASE("parallel kernels match the serial reference bit for bit") {
    const double a = -1.03, lo = 1, hi = 30265;
    std::vector<double> par(300000), ser(300000);
    k::sample_power_law(par, a, lo, hi, 99);
    k::sample_power_law_serial(ser, a, lo, hi, 99);
    CHECK(par == ser);

    std::vector<int> lpar(300000), lser(300000);
    k::sample_chain_lengths(lpar, -0.7, 99);
    k::sample_chain_lengths_serial(lser, -0.7, 99);
    CHECK(lpar == lser);

    CHECK(k::mc_segment_efd(300, a, lo, hi, 500000, 7) ==
          k::mc_segment_efd_serial(300, a, lo, hi, 500000, 7));

    CHECK(k::log_histogram(par, lo, hi, 30) == k::log_histogram_serial(ser, lo, hi, 30));

    CHECK(k::ks_distance_power_law(par, a, lo, hi) ==
          k::ks_distance_power_law_serial(ser, a, lo, hi));
}

TEST_CASE("power-law sampler matches the analytic CDF") {
    const double a = -1.03, lo = 1, hi = 30265;
    std::vector<double> samples(1000000);
    k::sample_power_law(samples, a, lo, hi, 4242);
    for (double v : samples) {
        REQUIRE(v >= lo);
        REQUIRE(v <= hi);
    }
    // Kolmogorov distance bound from the module contract
    CHECK(k::ks_distance_power_law(samples, a, lo, hi) < 0.005);
}

TEST_CASE("power_law_icdf endpoints and the a = -1 branch") {
    CHECK(k::power_law_icdf(0.0, -1.03, 1, 30265) == doctest::Approx(1.0));
    CHECK(k::power_law_icdf(1.0 - 1e-16, -1.03, 1, 30265) ==
          doctest::Approx(30265).epsilon(1e-6));
    // a = -1: log-uniform; the median is the geometric mean
    CHECK(k::power_law_icdf(0.5, -1.0, 1, 100) == doctest::Approx(10.0));
}

TEST_CASE("chain length sampler is geometric on {1,2,...}") {
    CHECK(k::chain_length_icdf(0.0, -0.7) == 1);
    const double r = std::pow(10.0, -0.7);
    std::vector<int> lengths(1000000);
    k::sample_chain_lengths(lengths, -0.7, 5);
    double sum = 0;
    std::size_t ones = 0;
    for (int l : lengths) {
        REQUIRE(l >= 1);
        sum += l;
        if (l == 1) ++ones;
    }
    const double mean = sum / static_cast<double>(lengths.size());
    CHECK(mean == doctest::Approx(1.0 / (1.0 - r)).epsilon(0.01));
    CHECK(static_cast<double>(ones) / static_cast<double>(lengths.size()) ==
          doctest::Approx(1.0 - r).epsilon(0.01));
}

TEST_CASE("samplers are deterministic per seed") {
    std::vector<double> x1(10000), x2(10000), x3(10000);
    k::sample_power_law(x1, -1.5, 1, 1000, 11);
    k::sample_power_law(x2, -1.5, 1, 1000, 11);
    k::sample_power_law(x3, -1.5, 1, 1000, 12);
    CHECK(x1 == x2);
    CHECK(x1 != x3);
}

TEST_CASE("log_histogram bins cover the span") {
    const int bpd = 30;
    const std::size_t nbins = k::log_histogram_bin_count(1, 30265, bpd);
    CHECK(nbins == 135); // 4.48 decades at 30 bins per decade
    CHECK(k::log_histogram_edge(1, bpd, 0) == doctest::Approx(1.0));
    CHECK(k::log_histogram_edge(1, bpd, 30) == doctest::Approx(10.0));

    std::vector<double> samples{1.0, 9.9, 10.1, 30000.0};
    auto counts = k::log_histogram(samples, 1, 30265, bpd);
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == samples.size());
    CHECK(counts[0] == 1);
}

TEST_CASE("mc_segment_efd guards its inputs") {
    CHECK_THROWS(k::mc_segment_efd(0, -1.03, 1, 100, 10, 1));
    CHECK_THROWS(k::mc_segment_efd(10, -1.03, 5, 5, 10, 1));
    CHECK_THROWS(k::mc_segment_efd(10, -1.03, 1, 100, 0, 1));
}
