#pragma once

#include <optional>
#include <vector>

#include "enor/kernel.hpp"
#include "enor/microstructure.hpp"

namespace enor {

/// omega^2(k) = dx * sum_{0 < |z_j| <= delta} K(|z_j|) (1 - cos(k z_j)).
double dispersion_omega_squared(const KernelCoeffs& kernel, double k);

struct DispersionValue {
    double omega = 0.0;
    bool unstable = false;  ///< omega^2 < 0: the kernel admits growing modes at this k
};
DispersionValue dispersion(const KernelCoeffs& kernel, double k);

struct GroupVelocity {
    double vg = 0.0;
    bool band_stop = false;  ///< omega(k) = 0 or unstable; vg reported as 0
};
/// v_g = dx * sum K(|z_j|) z_j sin(k z_j) / (2 omega).
GroupVelocity group_velocity(const KernelCoeffs& kernel, double k);

struct DispersionSample {
    double k, omega, vg;
    bool unstable;
};
std::vector<DispersionSample> dispersion_curve(const KernelCoeffs& kernel, double k_max, int samples);

/// Frequency at the first sign change of v_g along the sampled curve (linear interpolation), if any.
std::optional<double> band_stop_frequency(const std::vector<DispersionSample>& curve);

/// Bloch wavenumber of the microstructure repeated periodically, first band:
/// cos(k P) = trace(T(omega)) / 2 with T the layer transfer-matrix product.
/// Evaluated in extended precision. Returns nullopt inside a stop band.
std::optional<double> bloch_wavenumber(const Microstructure& cell, double omega);

/// c0 (exact homogenization) and R = d^2 v_g / d omega^2 at 0 of the periodically
/// repeated cell, from Richardson-extrapolated small-frequency expansion of k(omega).
PhysicsTargets bloch_targets(const Microstructure& cell);

/// Single bilayer unit cell of the periodic bar.
Microstructure bilayer_cell(double layer, const MaterialPair& materials = {});

/// Bloch group velocity d omega / dk of the periodic cell (finite difference of k(omega)).
std::optional<double> bloch_group_velocity(const Microstructure& cell, double omega);

struct PacketOptions {
    double bar_length = 300.0;
    double dx = 0.05;
    double dt = 0.02;
    double width = 20.0;       ///< Gaussian envelope half-width (length units)
    double travel_time = 120.0;
};

/// Energy-centroid speed of a wave packet with carrier frequency omega in the
/// discrete nonlocal model of `kernel` (initial packet built from omega(k)).
double nonlocal_packet_group_velocity(const KernelCoeffs& kernel, double omega, const PacketOptions& options = {});

struct DnsPacketOptions {
    double envelope = 30.0;    ///< time width of the inlet envelope
    double travel_time = 150.0;
    int min_steps_per_layer = 10;
};

/// Energy-centroid speed of a packet injected by a prescribed inlet velocity
/// sin(omega t) exp(-((t - 3 tau) / tau)^2) at the left end of `bar`.
double dns_packet_group_velocity(const Microstructure& bar, double omega, const DnsPacketOptions& options = {});

/// c0 from the packet speed at omega = 0.2 and R from a three-point second
/// difference of the packet speed at omega in {0.1, 0.2, 0.3}.
PhysicsTargets dns_packet_targets(const Microstructure& bar, const DnsPacketOptions& options = {});

}  // namespace enor
