#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "enor/mcmc.hpp"
#include "enor/rng.hpp"

namespace enor::support {

/// Three-state target pair for two-level delayed acceptance.
struct ThreeStateToy {
    Eigen::Vector3d fine{0.2, 0.5, 0.3};
    Eigen::Vector3d coarse{0.45, 0.25, 0.30};
    int nsub = 3;

    static int state(const Eigen::VectorXd& x) { return static_cast<int>(std::lround(x(0))); }

    Potential potential(const Eigen::Vector3d& p) const {
        return [p](const Eigen::VectorXd& x) {
            const int s = state(x);
            if (s < 0 || s > 2) return std::numeric_limits<double>::infinity();
            return -std::log(p(s));
        };
    }

    /// Coarse Metropolis kernel with a uniform proposal over the two other states.
    Eigen::Matrix3d coarse_kernel() const {
        Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b)
                if (a != b) P(a, b) = 0.5 * std::min(1.0, coarse(b) / coarse(a));
            P(a, a) = 1.0 - P.row(a).sum();
        }
        return P;
    }

    /// Brute-force fine transition matrix of the delayed-acceptance chain.
    Eigen::Matrix3d fine_kernel() const {
        Eigen::Matrix3d Pn = Eigen::Matrix3d::Identity();
        const Eigen::Matrix3d P = coarse_kernel();
        for (int k = 0; k < nsub; ++k) Pn = Pn * P;
        Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b)
                if (a != b) K(a, b) = Pn(a, b) * std::min(1.0, fine(b) * coarse(a) / (fine(a) * coarse(b)));
            K(a, a) = 1.0 - K.row(a).sum();
        }
        return K;
    }

    CoarseStep coarse_step() const {
        Potential u = potential(coarse);
        return [u](const Eigen::VectorXd& x, double ux, Rng& rng) {
            auto propose = [](const Eigen::VectorXd& v, Rng& r) {
                std::uniform_int_distribution<int> pick(1, 2);
                Eigen::VectorXd y(1);
                y(0) = static_cast<double>((state(v) + pick(r)) % 3);
                return y;
            };
            return mh_step(x, ux, u, propose, rng);
        };
    }
};

/// Asymptotic variance of the sample mean of f along a chain with kernel K and
/// stationary law pi, from the fundamental matrix Z = (I - K + 1 pi^T)^{-1}.
inline double asymptotic_variance(const Eigen::MatrixXd& K, const Eigen::VectorXd& pi, const Eigen::VectorXd& f) {
    const Eigen::Index n = K.rows();
    const Eigen::MatrixXd Z =
        (Eigen::MatrixXd::Identity(n, n) - K + Eigen::VectorXd::Ones(n) * pi.transpose()).inverse();
    const Eigen::VectorXd g = f.array() - pi.dot(f);
    const Eigen::VectorXd pg = pi.cwiseProduct(g);
    return 2.0 * pg.dot(Z * g) - pg.dot(g);
}

struct ToyOutcome {
    Eigen::Vector3d frequency;
    Eigen::Vector3d standard_error;
    Eigen::Matrix3d transitions;  ///< counts of a -> b moves
    std::size_t steps = 0;
    double acceptance = 0.0;
};

inline ToyOutcome run_three_state_toy(const ThreeStateToy& toy, int steps, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Eigen::VectorXd x0(1);
    x0(0) = 0.0;
    const Trace t = tlda_run(toy.potential(toy.fine), toy.potential(toy.coarse), toy.coarse_step(), x0, steps, toy.nsub, rng);
    ToyOutcome out;
    out.frequency.setZero();
    out.transitions.setZero();
    int prev = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const int s = ThreeStateToy::state(t.draws[i]);
        out.frequency(s) += 1.0;
        out.transitions(prev, s) += 1.0;
        prev = s;
    }
    out.steps = t.size();
    out.frequency /= static_cast<double>(t.size());
    out.acceptance = t.acceptance_rate();
    const Eigen::Matrix3d K = toy.fine_kernel();
    for (int s = 0; s < 3; ++s)
        out.standard_error(s) =
            std::sqrt(asymptotic_variance(K, toy.fine, Eigen::Vector3d::Unit(s)) / static_cast<double>(t.size()));
    return out;
}

/// Anisotropic correlated Gaussian target in d dimensions with known mean.
struct GaussianTarget {
    Eigen::VectorXd mean;
    Eigen::MatrixXd precision;
    Eigen::MatrixXd covariance;

    explicit GaussianTarget(int d, std::uint64_t seed = 1) {
        Rng rng = make_rng(seed);
        std::normal_distribution<double> n01;
        mean.resize(d);
        for (auto& v : mean) v = n01(rng);
        Eigen::MatrixXd A(d, d);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n01(rng);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        const Eigen::MatrixXd Q = qr.householderQ();
        Eigen::VectorXd sd(d);
        for (int i = 0; i < d; ++i) sd(i) = std::pow(10.0, -1.0 + 1.5 * i / std::max(1, d - 1));
        covariance = Q * sd.array().square().matrix().asDiagonal() * Q.transpose();
        precision = Q * sd.array().square().inverse().matrix().asDiagonal() * Q.transpose();
    }

    Potential potential() const {
        return [this](const Eigen::VectorXd& x) {
            const Eigen::VectorXd r = x - mean;
            return 0.5 * r.dot(precision * r);
        };
    }
};

}  // namespace enor::support
