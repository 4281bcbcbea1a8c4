#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace enor {

/// Elastic constants of the two constituents of a bilayer bar.
struct MaterialPair {
    double modulus1 = 1.0;
    double modulus2 = 0.25;
    double density = 1.0;
};

/// Layered 1D bar on [-L/2, L/2]: ordered interface positions and one Young's
/// modulus per layer. Density is uniform.
struct Microstructure {
    std::vector<double> interfaces;
    std::vector<double> moduli;
    double density = 1.0;

    std::size_t layer_count() const noexcept { return moduli.size(); }
    double left() const { return interfaces.front(); }
    double right() const { return interfaces.back(); }
    double length() const { return right() - left(); }
    double width(std::size_t layer) const { return interfaces[layer + 1] - interfaces[layer]; }
    double wave_speed(std::size_t layer) const;
    double impedance(std::size_t layer) const;

    /// Index of the layer containing x; interface points belong to the layer on their right,
    /// except the right end which belongs to the last layer.
    std::size_t layer_at(double x) const;

    /// Throws InvalidArgument if any invariant is violated.
    void validate() const;
};

/// Periodic (disorder = 0) or disordered bilayer bar. Layer widths are drawn
/// alternately for material 1 and 2 from U[(1-D)b, (1+D)b]; the last layer is
/// clipped at +L/2.
Microstructure build_microstructure(double length, double mean_layer, double disorder, std::uint64_t seed,
                                    const MaterialPair& materials = {});

/// Single-material bar split into layers of nominal width `layer` (useful for
/// exercising interface bookkeeping on a medium without reflections).
Microstructure homogeneous_bar(double length, double modulus, double density, double layer);

/// Low-frequency (quasi-static) wave speed: 1 / sqrt(rho * <1/E>), length-weighted.
double homogenized_wave_speed(const Microstructure& micro);

void to_json(nlohmann::json& j, const Microstructure& m);
void from_json(const nlohmann::json& j, Microstructure& m);

}  // namespace enor
