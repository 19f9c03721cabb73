#include "dsnbench/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "dsnbench/error.hpp"
#include "dsnbench/kernels.hpp"
#include "quadrature.hpp"

namespace dsnbench {

namespace {

struct LineFit {
    double slope = 0;
    double intercept = 0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0) throw Error("least squares: degenerate x values");
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

PowerLawFit fit_power_law(std::span<const double> samples, int bins_per_decade) {
    if (samples.size() < 100)
        throw Error("fit_power_law: need at least 100 samples, got " +
                    std::to_string(samples.size()));
    double lo = samples[0], hi = samples[0];
    for (double v : samples) {
        if (!(v > 0)) throw Error("fit_power_law: samples must be positive");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) throw Error("fit_power_law: zero-width support");

    const auto counts = kernels::log_histogram(samples, lo, hi, bins_per_decade);
    std::vector<double> xs, ys;
    xs.reserve(counts.size());
    ys.reserve(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0) continue;
        const double left = kernels::log_histogram_edge(lo, bins_per_decade, j);
        const double right = kernels::log_histogram_edge(lo, bins_per_decade, j + 1);
        const double center = std::sqrt(left * right);
        const double density = static_cast<double>(counts[j]) / (right - left);
        xs.push_back(std::log10(center));
        ys.push_back(std::log10(density));
    }
    if (xs.size() < 2) throw Error("fit_power_law: not enough populated bins");
    const LineFit line = least_squares(xs, ys);

    PowerLawFit fit;
    fit.a = line.slope;
    fit.b = line.intercept;
    fit.i_min = lo;
    fit.i_max = hi;
    fit.Z_i = normalize_Z_i(fit.a, fit.b, lo, hi);
    return fit;
}

ExpFit fit_exponential(std::span<const int> lengths) {
    if (lengths.size() < 100)
        throw Error("fit_exponential: need at least 100 samples, got " +
                    std::to_string(lengths.size()));
    std::unordered_map<int, std::uint64_t> counts;
    for (int l : lengths) {
        if (l < 1) throw Error("fit_exponential: lengths must be >= 1");
        ++counts[l];
    }
    if (counts.size() < 2)
        throw Error("fit_exponential: all samples share one length; slope undefined");
    std::vector<double> xs, ys;
    xs.reserve(counts.size());
    ys.reserve(counts.size());
    for (const auto& [l, count] : counts) {
        xs.push_back(static_cast<double>(l));
        ys.push_back(std::log10(static_cast<double>(count)));
    }
    const LineFit line = least_squares(xs, ys);
    if (!(line.slope < 0))
        throw Error("fit_exponential: non-decaying fit (c = " + fmt(line.slope) + ")");
    ExpFit fit;
    fit.c = line.slope;
    fit.d = line.intercept;
    fit.Z_l = normalize_Z_l(fit.c, fit.d);
    return fit;
}

double normalize_Z_i(double a, double b, double i_min, double i_max) {
    if (!(i_min > 0) || !(i_min < i_max))
        throw Error("normalize_Z_i: need 0 < i_min < i_max");
    const double scale = std::pow(10.0, b);
    if (a == -1.0) return scale * std::log(i_max / i_min);
    const double e = a + 1.0;
    return scale * (std::pow(i_max, e) - std::pow(i_min, e)) / e;
}

double normalize_Z_l(double c, double d) {
    if (!(c < 0)) throw Error("normalize_Z_l: diverges for c >= 0");
    return -std::pow(10.0, c + d) / (c * std::log(10.0));
}

double discrete_length_mass(double c, double d, double Z_l, int l_max) {
    if (!(c < 0)) throw Error("discrete_length_mass: c must be negative");
    if (l_max < 1) throw Error("discrete_length_mass: l_max must be >= 1");
    const double r = std::pow(10.0, c);
    const double total = std::pow(10.0, c + d) * (1.0 - std::pow(r, l_max)) / (1.0 - r);
    return total / Z_l;
}

double efd_segment_expectation(double h, const FittedModel& model, EfdMethod method,
                               std::uint64_t mc_seed, std::size_t mc_n) {
    if (!(h > 0)) throw Error("efd_segment_expectation: h must be positive");
    model.validate();
    switch (method) {
    case EfdMethod::quadrature: {
        const double upper = std::min(h, model.i_max);
        if (upper <= model.i_min) return 0.0;
        auto integrand = [&](double i) {
            const double slack = h - i;
            return model.delay_pdf(i) * slack * slack / (2.0 * h);
        };
        return detail::adaptive_simpson(integrand, model.i_min, upper, 1e-6 * h);
    }
    case EfdMethod::closed_form: {
        // hand-derived bracket kept verbatim as a cross-check of the
        // quadrature route, assuming i_min = 1 and h <= i_max
        const double a = model.a;
        const double d1 = a + 1.0, d2 = a + 2.0, d3 = a + 3.0;
        const double denom = d1 * d2 * d3;
        if (denom == 0 || d1 == 0 || d2 == 0)
            throw Error("efd closed form: degenerate slope a = " + fmt(a));
        const double bracket = std::pow(h, d3) / denom - 0.5 * h * h / d1 + h / d2 -
                               (2.0 - a * d3) / denom;
        return (1.0 / h) * (std::pow(10.0, model.b) / model.Z_i) * bracket;
    }
    case EfdMethod::monte_carlo:
        return kernels::mc_segment_efd(h, model.a, model.i_min, model.i_max, mc_n,
                                       mc_seed);
    }
    throw Error("efd_segment_expectation: unknown method");
}

double predict_efd(double h, const FittedModel& model) {
    if (!(model.mean_L >= 1)) throw Error("predict_efd: mean_L must be >= 1");
    return model.mean_L * efd_segment_expectation(h, model, EfdMethod::quadrature);
}

double zero_efd_fraction(double h, const FittedModel& model) {
    if (!(h > 0)) throw Error("zero_efd_fraction: h must be positive");
    model.validate();
    if (h <= model.i_min) return 1.0; // W <= h <= every intrinsic delay
    const double upper = std::min(h, model.i_max);
    auto integrand = [&](double i) { return model.delay_pdf(i) * i / h; };
    double frac = detail::adaptive_simpson(integrand, model.i_min, upper, 1e-9);
    if (h < model.i_max) {
        // mass with intrinsic delay beyond one full gap always wins the race
        auto pdf = [&](double i) { return model.delay_pdf(i); };
        frac += detail::adaptive_simpson(pdf, h, model.i_max, 1e-9);
    }
    return frac;
}

EfdReport empirical_efd(const SimLog& log, const ForwardForest& forest,
                        const FittedModel* model) {
    std::unordered_map<std::string, const MsgRecord*> by_mid;
    for (const auto& rec : log.messages)
        if (rec.kind == TraceKind::forward) by_mid[rec.mid] = &rec;

    std::vector<double> efds;
    efds.reserve(forest.edge_count());
    std::vector<std::string> missing;
    for (const auto& node : forest.nodes) {
        if (node.parent < 0) continue;
        auto it = by_mid.find(node.mid);
        if (it == by_mid.end()) {
            missing.push_back(node.mid);
            continue;
        }
        efds.push_back(it->second->t_posted - it->second->t_trace);
    }
    if (!missing.empty()) {
        std::string msg = "empirical_efd: simlog is missing " +
                          std::to_string(missing.size()) + " forward record(s):";
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i)
            msg += " " + missing[i];
        if (missing.size() > 10) msg += " ...";
        throw Error(msg);
    }

    EfdReport report;
    report.h = log.meta.h;
    report.n_forwards = efds.size();
    if (!efds.empty()) {
        std::sort(efds.begin(), efds.end());
        double sum = 0;
        std::size_t zeros = 0;
        for (double v : efds) {
            sum += v;
            if (v < 0.5e-6) ++zeros; // below simlog print resolution
        }
        report.empirical_mean = sum / static_cast<double>(efds.size());
        report.fraction_zero =
            static_cast<double>(zeros) / static_cast<double>(efds.size());
        auto pct = [&](int p) {
            const std::size_t rank = static_cast<std::size_t>(
                std::ceil(p / 100.0 * static_cast<double>(efds.size())));
            return efds[std::min(efds.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
        };
        for (int p : {50, 68, 90, 99}) report.percentiles[p] = pct(p);
        const std::size_t points = std::min<std::size_t>(efds.size(), 1000);
        report.cdf.reserve(points);
        for (std::size_t k = 1; k <= points; ++k) {
            const std::size_t idx = k * efds.size() / points;
            report.cdf.emplace_back(efds[idx - 1],
                                    static_cast<double>(idx) /
                                        static_cast<double>(efds.size()));
        }
    }
    if (model) {
        report.analytical_mean = predict_efd(report.h, *model);
        report.has_analytical = true;
        report.relative_gap =
            report.analytical_mean > 0
                ? (report.empirical_mean - report.analytical_mean) /
                      report.analytical_mean
                : 0.0;
    }
    return report;
}

ResourceReport resource_fit(const std::vector<SimLog>& logs) {
    std::vector<ResourceRow> rows;
    for (const auto& log : logs) {
        const double duration = log.meta.duration();
        if (!(duration > 0)) throw Error("resource_fit: run with empty duration");
        if (log.bots.empty()) throw Error("resource_fit: run without bots");
        double qi = 0, bs = 0, stored = 0;
        for (const auto& [uid, c] : log.bots) {
            qi += static_cast<double>(c.queries_issued);
            bs += static_cast<double>(c.bytes_served);
            stored += static_cast<double>(c.messages_stored);
        }
        const double n = static_cast<double>(log.bots.size());
        ResourceRow row;
        row.h = log.meta.h;
        row.query_rate = qi / n / duration;
        row.byte_rate = bs / n / duration;
        row.stored_mean = stored / n;
        row.post_rate = stored / n / duration;
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const ResourceRow& x, const ResourceRow& y) { return x.h < y.h; });
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (i == 0 || rows[i].h != rows[i - 1].h) ++distinct;
    if (distinct < 3)
        throw Error("resource_fit: need >= 3 distinct h values, got " +
                    std::to_string(distinct));

    ResourceReport report;
    report.rows = rows;
    auto fit_origin = [&](auto rate_of) {
        double sxy = 0, sxx = 0;
        for (const auto& row : rows) {
            const double x = 1.0 / row.h;
            sxy += x * rate_of(row);
            sxx += x * x;
        }
        return sxy / sxx;
    };
    report.beta_query = fit_origin([](const ResourceRow& r) { return r.query_rate; });
    report.beta_bytes = fit_origin([](const ResourceRow& r) { return r.byte_rate; });
    for (const auto& row : rows) {
        if (row.query_rate > 0)
            report.max_residual_query =
                std::max(report.max_residual_query,
                         std::abs(row.query_rate - report.beta_query / row.h) /
                             row.query_rate);
        if (row.byte_rate > 0)
            report.max_residual_bytes =
                std::max(report.max_residual_bytes,
                         std::abs(row.byte_rate - report.beta_bytes / row.h) /
                             row.byte_rate);
    }
    {
        std::vector<double> xs, ys;
        for (const auto& row : rows) {
            xs.push_back(1.0 / row.h);
            ys.push_back(row.stored_mean);
        }
        const LineFit line = least_squares(xs, ys);
        report.memory_constant = line.intercept;
        report.memory_slope = line.slope;
    }
    double posts = 0;
    for (const auto& row : rows) posts += row.post_rate;
    report.cpu_constant = posts / static_cast<double>(rows.size());
    return report;
}

ComparisonTable compare_report(const std::vector<EfdReport>& reports,
                               const FittedModel& model, double threshold) {
    model.validate();
    if (!(threshold > 0)) throw Error("compare_report: threshold must be positive");
    ComparisonTable table;
    table.threshold = threshold;
    for (const auto& report : reports) {
        ComparisonRow row;
        row.h = report.h;
        row.empirical_mean = report.empirical_mean;
        row.analytical_mean = predict_efd(report.h, model);
        row.relative_gap = row.analytical_mean > 0
                               ? (row.empirical_mean - row.analytical_mean) /
                                     row.analytical_mean
                               : (row.empirical_mean > 0 ? 1e9 : 0.0);
        row.flagged = std::abs(row.relative_gap) > threshold;
        table.rows.push_back(row);
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const ComparisonRow& x, const ComparisonRow& y) { return x.h < y.h; });
    return table;
}

namespace {

std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

void write_efd_report_csv(std::ostream& out, const std::vector<EfdReport>& reports) {
    out << "h,n_forwards,mean_efd_s,p50_s,p68_s,p90_s,p99_s,fraction_zero,"
           "analytical_mean_s,relative_gap\n";
    for (const auto& r : reports) {
        out << csv_num(r.h) << ',' << r.n_forwards << ',' << csv_num(r.empirical_mean);
        for (int p : {50, 68, 90, 99}) {
            auto it = r.percentiles.find(p);
            out << ',' << csv_num(it == r.percentiles.end() ? 0.0 : it->second);
        }
        out << ',' << csv_num(r.fraction_zero);
        out << ',' << (r.has_analytical ? csv_num(r.analytical_mean) : "");
        out << ',' << (r.has_analytical ? csv_num(r.relative_gap) : "");
        out << '\n';
    }
}

void write_cdf_csv(std::ostream& out, const EfdReport& report) {
    out << "efd_seconds,cumulative_fraction\n";
    for (const auto& [v, f] : report.cdf) out << csv_num(v) << ',' << csv_num(f) << '\n';
}

void write_resource_csv(std::ostream& out, const ResourceReport& report) {
    out << "h,query_rate_per_bot,byte_rate_per_bot,stored_mean_per_bot,"
           "post_rate_per_bot\n";
    for (const auto& r : report.rows)
        out << csv_num(r.h) << ',' << csv_num(r.query_rate) << ','
            << csv_num(r.byte_rate) << ',' << csv_num(r.stored_mean) << ','
            << csv_num(r.post_rate) << '\n';
}

void write_resource_text(std::ostream& out, const ResourceReport& report) {
    out << "resource model: query_rate = " << csv_num(report.beta_query)
        << "/h (max residual " << csv_num(report.max_residual_query) << "), "
        << "byte_rate = " << csv_num(report.beta_bytes) << "/h (max residual "
        << csv_num(report.max_residual_bytes) << ")\n";
    out << "memory placeholder: stored = " << csv_num(report.memory_constant)
        << " + " << csv_num(report.memory_slope) << "/h per bot\n";
    out << "bot-logic placeholder: " << csv_num(report.cpu_constant)
        << " posts/s per bot\n";
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
    out << "h,empirical_mean_s,analytical_mean_s,relative_gap,flagged\n";
    for (const auto& r : table.rows)
        out << csv_num(r.h) << ',' << csv_num(r.empirical_mean) << ','
            << csv_num(r.analytical_mean) << ',' << csv_num(r.relative_gap) << ','
            << (r.flagged ? 1 : 0) << '\n';
}

void write_comparison_text(std::ostream& out, const ComparisonTable& table) {
    out << "model vs simulation (flag threshold " << csv_num(table.threshold * 100)
        << "%)\n";
    for (const auto& r : table.rows) {
        out << "  h=" << csv_num(r.h) << "s: empirical " << csv_num(r.empirical_mean)
            << "s, analytical " << csv_num(r.analytical_mean) << "s, gap "
            << csv_num(r.relative_gap * 100) << "%";
        if (r.flagged)
            out << "  [FLAG: model "
                << (r.relative_gap > 0 ? "under-predicts" : "over-predicts") << "]";
        out << '\n';
    }
}

} // namespace dsnbench
