#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "enor/field.hpp"
#include "enor/loading.hpp"
#include "enor/microstructure.hpp"

namespace enor {

/// Solves rho w_t = q_x + g(x, t), q_t = E w_x on a layered bar by transporting
/// the Riemann invariants R = q - z w (speed +c) and G = q + z w (speed -c).
///
/// Each layer holds n_l = round(T_l / dtau) cells, so a characteristic crosses
/// one cell per internal step. Interface nodes are stored once per adjacent
/// layer. The end values of w are prescribed.
class CharacteristicSolver {
public:
    struct Sources {
        std::function<double(double, double)> force;  ///< g(x, t); empty means zero
        std::function<double(double)> left;           ///< w(left end, t); empty means zero
        std::function<double(double)> right;          ///< w(right end, t); empty means zero
    };

    CharacteristicSolver(const Microstructure& micro, double internal_dt);

    void advance(const Sources& sources);

    double time() const noexcept { return time_; }
    double internal_dt() const noexcept { return dtau_; }
    std::size_t node_count() const noexcept { return total_nodes_; }

    /// Primary variable w at x, linear between nodes.
    double value_at(double x) const;
    /// Secondary variable q at x, linear between nodes.
    double flux_at(double x) const;

    /// sum_l dtau / (4 z_l) * (sum of squared invariants owned by layer l);
    /// conserved exactly by the scheme when g = 0 and the ends are at rest.
    double energy() const;

    struct Stencil {
        std::size_t layer;
        std::size_t node;
        double weight;  ///< weight of node + 1
    };
    Stencil locate(double x) const;
    double sample(const Stencil& s) const;

    /// Direct access to the characteristic state of one layer (tests only).
    const std::vector<double>& right_going(std::size_t layer) const { return layers_[layer].r; }
    const std::vector<double>& left_going(std::size_t layer) const { return layers_[layer].g; }

    /// Interface state from the incoming invariants a (from the left layer)
    /// and b (from the right layer): returns {w*, q*}.
    static std::pair<double, double> interface_state(double z_left, double z_right, double a, double b);

private:
    struct Layer {
        double x0, h, c, z;
        std::size_t cells;
        std::vector<double> r, g;
    };

    double source_integral(const Sources& s, double xa, double xb) const;

    std::vector<Layer> layers_;
    double dtau_;
    double time_ = 0.0;
    std::uint64_t steps_ = 0;
    std::size_t total_nodes_ = 0;
};

enum class DnsField { Displacement, Velocity };

struct DnsOptions {
    double final_time = 2.0;
    double dx = 0.05;
    double dt = 0.02;
    /// Minimum number of internal steps per layer traversal.
    int min_steps_per_layer = 20;
    DnsField field = DnsField::Displacement;
};

/// Internal step: dt / q with the smallest integer q such that every layer
/// traversal spans at least min_steps_per_layer internal steps.
double dns_internal_step(const Microstructure& micro, const DnsOptions& options);

/// Output grid x_i = -L/2 + i dx, i = 0..round(L/dx).
std::vector<double> uniform_grid(double length, double dx);

/// Displacement (or velocity) field on the uniform output grid: one row per
/// output frame t_n = n dt, n = 0..round(T/dt).
Field dns_solve(const Microstructure& micro, const LoadingScenario& scenario, const DnsOptions& options);

}  // namespace enor
