#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "enor/ensemble.hpp"
#include "enor/kle.hpp"

namespace enor {

struct PosteriorSpec {
    double epsilon = 0.01;
    double gamma = 1.0;
    double sigma_hat = 0.0;  ///< prior std of the free coefficients; 0 selects 0.1 * max|C0|
    Eigen::VectorXd prior_mean;  ///< C0, free coefficients
    double ln_sigma_lo = -9.210340371976184;  ///< ln 1e-4
    double ln_sigma_hi = 0.0;
    int ensemble_size = 30;  ///< K
    double lgp = 10.0;
    int aem_draws = 200;  ///< N0

    /// sigma_hat with the default resolved.
    double prior_std() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const PosteriorSpec& s);
void from_json(const nlohmann::json& j, PosteriorSpec& s);

/// Per-(s, n, i) bias between fine and coarse outputs, estimated over prior draws.
struct AEMCorrection {
    std::vector<Field> bias_mean;
    std::vector<Field> bias_var;  ///< clamped at zero
    int draws = 0;
    int diverged = 0;
    double clamp_fraction = 0.0;

    bool over_dispersed() const noexcept { return clamp_fraction > 0.5; }
};

/// Negative log posteriors over theta = (C_0..C_{M-2}, ln sigma_gp).
/// The KLE basis and a K x R block of standard normals are fixed at construction,
/// so both posteriors are deterministic functions of theta.
class Posterior {
public:
    Posterior(const CalibrationProblem& problem, const PosteriorSpec& spec, std::uint64_t xi_seed);
    Posterior(const CalibrationProblem& problem, const PosteriorSpec& spec, KLEBasis basis, std::uint64_t xi_seed);

    int dimension() const noexcept { return problem_->free_count() + 1; }
    const CalibrationProblem& problem() const noexcept { return *problem_; }
    const PosteriorSpec& spec() const noexcept { return spec_; }
    const KLEBasis& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& half_modes() const noexcept { return modes_; }
    const Eigen::MatrixXd& xi_block() const noexcept { return xi_; }
    const CoarseModel& coarse_model() const noexcept { return *coarse_; }

    void set_bounds(double lo, double hi);
    /// Installs (or, with nullptr, removes) the AEM used by coarse().
    void set_aem(std::shared_ptr<const AEMCorrection> aem);
    const AEMCorrection* aem() const noexcept { return aem_.get(); }

    /// ||C - C0||^2 / (2 sigma_hat^2), +infinity when ln sigma is outside the bounds.
    double prior_term(const Eigen::VectorXd& theta) const;
    /// Fine (accumulated) negative log posterior; +infinity on divergence or out of bounds.
    double fine(const Eigen::VectorXd& theta) const;
    /// Coarse (step-wise) negative log posterior, AEM-corrected when an AEM is installed.
    double coarse(const Eigen::VectorXd& theta) const;
    /// Same with the correction switched off.
    double coarse_uncorrected(const Eigen::VectorXd& theta) const;

    EnsembleMoments fine_moments(const Eigen::VectorXd& theta) const;

    Eigen::VectorXd theta(const Eigen::VectorXd& free, double ln_sigma) const;

private:
    double coarse_impl(const Eigen::VectorXd& theta, bool corrected) const;

    const CalibrationProblem* problem_;
    PosteriorSpec spec_;
    KLEBasis basis_;
    Eigen::MatrixXd modes_;
    Eigen::MatrixXd xi_;
    std::unique_ptr<CoarseModel> coarse_;
    std::shared_ptr<const AEMCorrection> aem_;
};

/// Draws N0 parameter sets (C, ln sigma, xi) from the prior and estimates the
/// fine-minus-coarse output bias mean and variance. Draws whose fine rollout
/// diverges are skipped and counted.
AEMCorrection estimate_aem(const Posterior& posterior, int draws, std::uint64_t seed);

struct BoundTuning {
    double lo = 0.0;
    double hi = 0.0;
    int rounds = 0;
    bool matched = false;
    double max_relative_gap = 0.0;
    std::vector<double> probes, fine, coarse;
    std::shared_ptr<const AEMCorrection> aem;
};

/// Recomputes the AEM for the current ln sigma bounds and compares the coarse
/// and fine posteriors at C0 on `probes` equispaced ln sigma values. Until every
/// probe matches within `tolerance` (relative), the bracket width is halved
/// (upper end pulled down) when the mismatch sits in the upper half and doubled
/// (lower end pushed down) otherwise. Installs the final AEM and bounds.
BoundTuning tune_bounds(Posterior& posterior, std::uint64_t seed, int probes = 8, double tolerance = 0.1,
                        int max_rounds = 6);

}  // namespace enor
