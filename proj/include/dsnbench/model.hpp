#pragma once

#include <iosfwd>
#include <string>

namespace dsnbench {

/// Fitted intrinsic-delay / chain-length model.
///
/// Intrinsic delay density  p(i) = (1/Z_i) i^a 10^b   on [i_min, i_max],
/// chain length law         p(l) = (1/Z_l) 10^{c l + d}  for l >= 1.
///
/// Slopes a and c are the authoritative parameters; b and d are histogram
/// intercepts that Z_i / Z_l absorb, so the normalized densities do not
/// depend on the binning that produced them. mean_L is the directly averaged
/// forwarding sequence length.
struct FittedModel {
    double a = 0;
    double b = 0;
    double i_min = 0;
    double i_max = 0;
    double Z_i = 0;
    double c = 0;
    double d = 0;
    double Z_l = 0;
    double mean_L = 0;

    /// Throws on parameters that make the model unusable for sampling or
    /// prediction (bounds inverted, non-decaying length law, ...).
    void validate() const;

    /// Normalized delay density at i (0 outside [i_min, i_max]).
    double delay_pdf(double i) const;
};

FittedModel model_from_json(std::istream& in);
void model_to_json(std::ostream& out, const FittedModel& model);
FittedModel load_model(const std::string& path);
void save_model(const std::string& path, const FittedModel& model);

} // namespace dsnbench
