#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dsnbench/harness.hpp"
#include "dsnbench/model.hpp"
#include "dsnbench/trace.hpp"

namespace dsnbench {

struct PowerLawFit {
    double a = 0;
    double b = 0;
    double Z_i = 0;
    double i_min = 0;
    double i_max = 0;
};

/// Least-squares line on log10(count density) over log10(i) across
/// logarithmically binned samples; empty bins are excluded. Needs >= 100
/// positive samples spanning a non-degenerate range.
PowerLawFit fit_power_law(std::span<const double> samples, int bins_per_decade = 30);

struct ExpFit {
    double c = 0;
    double d = 0;
    double Z_l = 0;
};

/// Least-squares line on log10(count) over integer chain length; lengths with
/// zero count are excluded. Needs >= 100 samples on >= 2 distinct lengths and
/// a decaying (c < 0) result.
ExpFit fit_exponential(std::span<const int> lengths);

/// Closed-form integral of i^a 10^b over [i_min, i_max]; the a = -1 case uses
/// the logarithmic antiderivative.
double normalize_Z_i(double a, double b, double i_min, double i_max);

/// Closed-form integral of 10^{c l + d} over [1, inf); diverges for c >= 0.
double normalize_Z_l(double c, double d);

/// Total discrete mass sum_{l=1..l_max} 10^{c l + d} / Z_l, evaluated in
/// closed form (geometric series). The brute-force summation in the tests
/// must land on this value.
double discrete_length_mass(double c, double d, double Z_l, int l_max);

enum class EfdMethod { quadrature, closed_form, monte_carlo };

/// E[max{I, W} - I] for one forwarding segment, W uniform on [0, h].
/// quadrature (the reference) integrates p(i) (h-i)^2 / (2h) over
/// [i_min, min(h, i_max)] to 1e-6 * h absolute tolerance; closed_form
/// evaluates the hand-derived bracket expression (kept as a cross-check; it
/// presumes i_min = 1 and h <= i_max); monte_carlo averages over n
/// inverse-CDF samples.
double efd_segment_expectation(double h, const FittedModel& model, EfdMethod method,
                               std::uint64_t mc_seed = 1, std::size_t mc_n = 1000000);

/// mean_L * E[max{I, W} - I] via the reference quadrature.
double predict_efd(double h, const FittedModel& model);

/// P(W <= I) = integral of p(i) min(i, h) / h: the model's prediction for the
/// fraction of forwards with zero extra delay.
double zero_efd_fraction(double h, const FittedModel& model);

struct EfdReport {
    double h = 0;
    std::size_t n_forwards = 0;
    double empirical_mean = 0;
    std::map<int, double> percentiles; // p -> seconds for p in {50, 68, 90, 99}
    double fraction_zero = 0;
    double analytical_mean = 0; // 0 when no model attached
    double relative_gap = 0;
    bool has_analytical = false;
    std::vector<std::pair<double, double>> cdf; // (efd seconds, cumulative fraction)
};

/// Per-forward EFD = T_posted - T_trace across the forest's edges. Raises
/// listing the missing mids when the simlog does not cover the forest.
EfdReport empirical_efd(const SimLog& log, const ForwardForest& forest,
                        const FittedModel* model = nullptr);

struct ResourceRow {
    double h = 0;
    double query_rate = 0;  // mean per-bot queries issued per second
    double byte_rate = 0;   // mean per-bot bytes served per second
    double stored_mean = 0; // mean per-bot messages stored (memory placeholder)
    double post_rate = 0;   // mean per-bot posts per second (bot-logic placeholder)
};

struct ResourceReport {
    std::vector<ResourceRow> rows; // ascending h
    double beta_query = 0;         // query_rate ~ beta_query / h
    double beta_bytes = 0;         // byte_rate  ~ beta_bytes / h
    double max_residual_query = 0; // max relative residual of the 1/h fit
    double max_residual_bytes = 0;
    double memory_constant = 0; // affine fit of stored_mean against 1/h
    double memory_slope = 0;
    double cpu_constant = 0; // mean post_rate; independent of h by design
};

/// Least-squares fit of per-bot query and byte rates against 1/h through the
/// origin, over >= 3 distinct h values.
ResourceReport resource_fit(const std::vector<SimLog>& logs);

struct ComparisonRow {
    double h = 0;
    double empirical_mean = 0;
    double analytical_mean = 0;
    double relative_gap = 0; // (empirical - analytical) / analytical
    bool flagged = false;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows; // ascending h
    double threshold = 0.15;
};

/// One row per report: empirical vs analytical mean EFD; rows whose absolute
/// relative gap exceeds the threshold are flagged.
ComparisonTable compare_report(const std::vector<EfdReport>& reports,
                               const FittedModel& model, double threshold = 0.15);

void write_efd_report_csv(std::ostream& out, const std::vector<EfdReport>& reports);
void write_cdf_csv(std::ostream& out, const EfdReport& report);
void write_resource_csv(std::ostream& out, const ResourceReport& report);
void write_resource_text(std::ostream& out, const ResourceReport& report);
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);
void write_comparison_text(std::ostream& out, const ComparisonTable& table);

} // namespace dsnbench
