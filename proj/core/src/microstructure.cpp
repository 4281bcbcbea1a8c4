#include "enor/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/rng.hpp"

namespace enor {

double Microstructure::wave_speed(std::size_t layer) const { return std::sqrt(moduli[layer] / density); }

double Microstructure::impedance(std::size_t layer) const { return std::sqrt(moduli[layer] * density); }

std::size_t Microstructure::layer_at(double x) const {
    auto it = std::upper_bound(interfaces.begin(), interfaces.end(), x);
    if (it == interfaces.begin()) return 0;
    std::size_t idx = static_cast<std::size_t>(it - interfaces.begin()) - 1;
    return std::min(idx, layer_count() - 1);
}

void Microstructure::validate() const {
    if (interfaces.size() < 2) throw InvalidArgument("microstructure needs at least one layer");
    if (moduli.size() + 1 != interfaces.size())
        throw InvalidArgument("microstructure: moduli count must equal interface count - 1");
    for (std::size_t i = 1; i < interfaces.size(); ++i)
        if (!(interfaces[i] > interfaces[i - 1]))
            throw InvalidArgument("microstructure: interfaces must be strictly increasing");
    for (double e : moduli)
        if (!(e > 0.0)) throw InvalidArgument("microstructure: moduli must be positive");
    if (!(density > 0.0)) throw InvalidArgument("microstructure: density must be positive");
    if (std::abs(left() + right()) > 1e-9 * length())
        throw InvalidArgument("microstructure: bar must be centred on the origin");
}

Microstructure build_microstructure(double length, double mean_layer, double disorder, std::uint64_t seed,
                                    const MaterialPair& materials) {
    if (!(length > 0.0)) throw InvalidArgument("bar length must be positive");
    if (!(mean_layer > 0.0)) throw InvalidArgument("mean layer size must be positive");
    if (mean_layer >= length) throw InvalidArgument("mean layer size must be smaller than the bar length");
    if (!(disorder >= 0.0) || disorder >= 1.0) throw InvalidArgument("disorder must lie in [0, 1)");

    Microstructure micro;
    micro.density = materials.density;
    const double left = -0.5 * length;
    const double right = 0.5 * length;
    // Snap tolerance for the final interface; keeps D=0 bars exactly periodic.
    const double snap = 1e-9 * mean_layer;

    micro.interfaces.push_back(left);
    if (disorder == 0.0) {
        for (std::size_t k = 1;; ++k) {
            double x = left + static_cast<double>(k) * mean_layer;
            bool last = x >= right - snap;
            micro.interfaces.push_back(last ? right : x);
            micro.moduli.push_back((k % 2 == 1) ? materials.modulus1 : materials.modulus2);
            if (last) break;
        }
    } else {
        Rng rng = make_rng(seed, {0x6d6963726fULL});
        std::uniform_real_distribution<double> width1((1.0 - disorder) * mean_layer, (1.0 + disorder) * mean_layer);
        std::uniform_real_distribution<double> width2((1.0 - disorder) * mean_layer, (1.0 + disorder) * mean_layer);
        double x = left;
        for (std::size_t k = 1;; ++k) {
            bool first_material = (k % 2 == 1);
            x += first_material ? width1(rng) : width2(rng);
            bool last = x >= right - snap;
            micro.interfaces.push_back(last ? right : x);
            micro.moduli.push_back(first_material ? materials.modulus1 : materials.modulus2);
            if (last) break;
        }
    }
    micro.validate();
    return micro;
}

Microstructure homogeneous_bar(double length, double modulus, double density, double layer) {
    return build_microstructure(length, layer, 0.0, 0, MaterialPair{modulus, modulus, density});
}

double homogenized_wave_speed(const Microstructure& micro) {
    double compliance = 0.0;
    for (std::size_t l = 0; l < micro.layer_count(); ++l) compliance += micro.width(l) / micro.moduli[l];
    compliance /= micro.length();
    return 1.0 / std::sqrt(micro.density * compliance);
}

void to_json(nlohmann::json& j, const Microstructure& m) {
    j = nlohmann::json{{"interfaces", m.interfaces}, {"moduli", m.moduli}, {"density", m.density}};
}

void from_json(const nlohmann::json& j, Microstructure& m) {
    j.at("interfaces").get_to(m.interfaces);
    j.at("moduli").get_to(m.moduli);
    j.at("density").get_to(m.density);
    m.validate();
}

}  // namespace enor
