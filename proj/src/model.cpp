#include "dsnbench/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dsnbench/error.hpp"

namespace dsnbench {

void FittedModel::validate() const {
    if (!(i_min > 0) || !(i_min < i_max))
        throw Error("model: need 0 < i_min < i_max");
    if (!(Z_i > 0)) throw Error("model: Z_i must be positive");
    if (!(c < 0)) throw Error("model: c must be negative");
    if (!(Z_l > 0)) throw Error("model: Z_l must be positive");
    if (!(mean_L >= 1)) throw Error("model: mean_L must be >= 1");
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(d))
        throw Error("model: non-finite parameter");
}

double FittedModel::delay_pdf(double i) const {
    if (i < i_min || i > i_max) return 0.0;
    return std::pow(i, a) * std::pow(10.0, b) / Z_i;
}

FittedModel model_from_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(std::string("model: bad JSON: ") + e.what());
    }
    FittedModel m;
    auto get = [&](const char* key) -> double {
        if (!j.contains(key)) throw Error(std::string("model: missing field '") + key + "'");
        return j.at(key).get<double>();
    };
    m.a = get("a");
    m.b = get("b");
    m.i_min = get("i_min");
    m.i_max = get("i_max");
    m.Z_i = get("Z_i");
    m.c = get("c");
    m.d = get("d");
    m.Z_l = get("Z_l");
    m.mean_L = get("mean_L");
    m.validate();
    return m;
}

void model_to_json(std::ostream& out, const FittedModel& m) {
    nlohmann::json j{{"a", m.a},     {"b", m.b},   {"i_min", m.i_min},
                     {"i_max", m.i_max}, {"Z_i", m.Z_i}, {"c", m.c},
                     {"d", m.d},     {"Z_l", m.Z_l}, {"mean_L", m.mean_L}};
    out << j.dump(2) << '\n';
}

FittedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file '" + path + "'");
    return model_from_json(in);
}

void save_model(const std::string& path, const FittedModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model file '" + path + "'");
    model_to_json(out, model);
}

} // namespace dsnbench
