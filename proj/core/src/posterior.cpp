#include "enor/posterior.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "enor/error.hpp"
#include "enor/rng.hpp"

namespace enor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd normal_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng = make_rng(seed, {0x7869ULL});
    std::normal_distribution<double> n01;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index k = 0; k < rows; ++k)
        for (Eigen::Index r = 0; r < cols; ++r) m(k, r) = n01(rng);
    return m;
}

}  // namespace

double PosteriorSpec::prior_std() const {
    if (sigma_hat > 0.0) return sigma_hat;
    const double cmax = prior_mean.size() ? prior_mean.cwiseAbs().maxCoeff() : 0.0;
    return 0.1 * cmax;
}

void PosteriorSpec::validate() const {
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be nonnegative");
    if (sigma_hat < 0.0) throw InvalidArgument("sigma_hat must be positive (0 selects the default)");
    if (prior_mean.size() == 0) throw InvalidArgument("posterior needs the prior mean C0");
    if (!(prior_std() > 0.0)) throw InvalidArgument("prior std of the kernel coefficients must be positive");
    if (!(ln_sigma_lo < ln_sigma_hi)) throw InvalidArgument("ln sigma_gp bounds must satisfy lo < hi");
    if (ensemble_size < 2) throw InvalidArgument("ensemble size K must be at least 2");
    if (!(lgp > 0.0)) throw InvalidArgument("l_gp must be positive");
    if (aem_draws < 2) throw InvalidArgument("AEM needs at least two draws");
}

void to_json(nlohmann::json& j, const PosteriorSpec& s) {
    j = nlohmann::json{{"epsilon", s.epsilon},
                       {"gamma", s.gamma},
                       {"sigma_hat", s.prior_std()},
                       {"C0", std::vector<double>(s.prior_mean.data(), s.prior_mean.data() + s.prior_mean.size())},
                       {"ln_sigma_lo", s.ln_sigma_lo},
                       {"ln_sigma_hi", s.ln_sigma_hi},
                       {"K", s.ensemble_size},
                       {"l_gp", s.lgp},
                       {"N0", s.aem_draws}};
}

void from_json(const nlohmann::json& j, PosteriorSpec& s) {
    s.epsilon = j.value("epsilon", s.epsilon);
    s.gamma = j.value("gamma", s.gamma);
    s.sigma_hat = j.value("sigma_hat", s.sigma_hat);
    if (j.contains("C0")) {
        const auto c = j.at("C0").get<std::vector<double>>();
        s.prior_mean = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    s.ln_sigma_lo = j.value("ln_sigma_lo", s.ln_sigma_lo);
    s.ln_sigma_hi = j.value("ln_sigma_hi", s.ln_sigma_hi);
    s.ensemble_size = j.value("K", s.ensemble_size);
    s.lgp = j.value("l_gp", s.lgp);
    s.aem_draws = j.value("N0", s.aem_draws);
}

Posterior::Posterior(const CalibrationProblem& problem, const PosteriorSpec& spec, std::uint64_t xi_seed)
    : Posterior(problem, spec, build_basis(spec.lgp, problem.grid().length()), xi_seed) {}

Posterior::Posterior(const CalibrationProblem& problem, const PosteriorSpec& spec, KLEBasis basis,
                     std::uint64_t xi_seed)
    : problem_(&problem), spec_(spec), basis_(std::move(basis)) {
    spec_.validate();
    if (spec_.prior_mean.size() != problem.free_count())
        throw InvalidArgument(fmt::format("prior mean has {} coefficients, kernel has {} free ones",
                                          spec_.prior_mean.size(), problem.free_count()));
    if (std::abs(basis_.lgp - spec_.lgp) > 1e-12 * spec_.lgp) throw InvalidArgument("KLE basis built for another l_gp");
    spec_.sigma_hat = spec_.prior_std();
    modes_ = half_grid_modes(basis_, problem.grid());
    xi_ = normal_block(spec_.ensemble_size, basis_.terms(), xi_seed);
    coarse_ = std::make_unique<CoarseModel>(problem, modes_, xi_);
}

void Posterior::set_bounds(double lo, double hi) {
    if (!(lo < hi)) throw InvalidArgument("ln sigma_gp bounds must satisfy lo < hi");
    spec_.ln_sigma_lo = lo;
    spec_.ln_sigma_hi = hi;
}

Eigen::VectorXd Posterior::theta(const Eigen::VectorXd& free, double ln_sigma) const {
    Eigen::VectorXd t(dimension());
    t.head(free.size()) = free;
    t(dimension() - 1) = ln_sigma;
    return t;
}

double Posterior::prior_term(const Eigen::VectorXd& theta) const {
    if (theta.size() != dimension()) throw InvalidArgument("parameter vector has the wrong length");
    const double ls = theta(dimension() - 1);
    if (!(ls >= spec_.ln_sigma_lo && ls <= spec_.ln_sigma_hi)) return kInf;
    const double s = spec_.sigma_hat;
    return (theta.head(dimension() - 1) - spec_.prior_mean).squaredNorm() / (2.0 * s * s);
}

EnsembleMoments Posterior::fine_moments(const Eigen::VectorXd& theta) const {
    return enor::fine_moments(*problem_, theta.head(dimension() - 1), std::exp(theta(dimension() - 1)), modes_, xi_);
}

double Posterior::fine(const Eigen::VectorXd& theta) const {
    const double prior = prior_term(theta);
    if (!std::isfinite(prior)) return kInf;
    try {
        const EnsembleMoments m = fine_moments(theta);
        double misfit = 0.0;
        for (std::size_t s = 0; s < problem_->scenario_count(); ++s)
            misfit += abc_misfit(problem_->grid(), m.mean[s], m.sd[s], problem_->data(s), spec_.gamma);
        const double v = misfit / (2.0 * spec_.epsilon * spec_.epsilon) + prior;
        return std::isfinite(v) ? v : kInf;
    } catch (const SolverDivergence&) {
        return kInf;
    }
}

double Posterior::coarse_impl(const Eigen::VectorXd& theta, bool corrected) const {
    const double prior = prior_term(theta);
    if (!std::isfinite(prior)) return kInf;
    try {
        const double misfit =
            coarse_->misfit(theta.head(dimension() - 1), std::exp(theta(dimension() - 1)), spec_.gamma, corrected);
        const double v = misfit / (2.0 * spec_.epsilon * spec_.epsilon) + prior;
        return std::isfinite(v) ? v : kInf;
    } catch (const SolverDivergence&) {
        return kInf;
    }
}

void Posterior::set_aem(std::shared_ptr<const AEMCorrection> aem) {
    if (aem)
        coarse_->set_bias(aem->bias_mean, aem->bias_var);
    else
        coarse_->set_bias({}, {});
    aem_ = std::move(aem);
}

double Posterior::coarse(const Eigen::VectorXd& theta) const { return coarse_impl(theta, true); }

double Posterior::coarse_uncorrected(const Eigen::VectorXd& theta) const { return coarse_impl(theta, false); }

AEMCorrection estimate_aem(const Posterior& posterior, int draws, std::uint64_t seed) {
    if (draws < 2) throw InvalidArgument("AEM needs at least two draws");
    const CalibrationProblem& problem = posterior.problem();
    const PosteriorSpec& spec = posterior.spec();
    const std::size_t ns = problem.scenario_count();
    const Eigen::Index frames = problem.frames();
    const Eigen::Index np = problem.grid().points();
    const int nfree = problem.free_count();
    const int terms = posterior.basis().terms();

    std::vector<Field> mf(ns, Field::Zero(frames, np)), vf = mf, mc = mf, vc = mf;
    AEMCorrection out;
    int used = 0;
    for (int d = 0; d < draws; ++d) {
        Rng rng = make_rng(seed, {0x61656dULL, static_cast<std::uint64_t>(d)});
        std::normal_distribution<double> n01;
        std::uniform_real_distribution<double> unif(spec.ln_sigma_lo, spec.ln_sigma_hi);
        Eigen::VectorXd free(nfree);
        for (int m = 0; m < nfree; ++m) free(m) = spec.prior_mean(m) + spec.sigma_hat * n01(rng);
        const double sigma = std::exp(unif(rng));
        Eigen::VectorXd xi(terms);
        for (int r = 0; r < terms; ++r) xi(r) = n01(rng);

        std::vector<Field> fine(ns);
        try {
            NonlocalOperator draw_op(problem.grid(), problem.stencil(free));
            draw_op.set_correction(sample_field(posterior.half_modes(), sigma, xi));
            for (std::size_t s = 0; s < ns; ++s) fine[s] = problem.rollout(draw_op, s);
        } catch (const SolverDivergence&) {
            ++out.diverged;
            continue;
        }
        std::vector<Field> coarse = posterior.coarse_model().realization(free, sigma, xi);
        bool finite = true;
        for (std::size_t s = 0; s < ns && finite; ++s) finite = fine[s].allFinite() && coarse[s].allFinite();
        if (!finite) {
            ++out.diverged;
            continue;
        }
        ++used;
        for (std::size_t s = 0; s < ns; ++s) {
            Field delta = fine[s] - mf[s];
            mf[s] += delta / used;
            vf[s].array() += delta.array() * (fine[s] - mf[s]).array();
            delta = coarse[s] - mc[s];
            mc[s] += delta / used;
            vc[s].array() += delta.array() * (coarse[s] - mc[s]).array();
        }
    }
    if (used < 2) throw NumericalError(fmt::format("AEM: only {} of {} prior draws produced finite outputs", used, draws));
    out.draws = used;
    const SolverGrid& g = problem.grid();
    std::size_t clamped = 0, total = 0;
    out.bias_mean.resize(ns);
    out.bias_var.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        out.bias_mean[s] = mf[s] - mc[s];
        Field v = (vf[s] - vc[s]) / static_cast<double>(used - 1);
        for (Eigen::Index n = 2; n < frames; ++n)
            for (Eigen::Index i = g.interior_begin(); i < g.interior_end(); ++i) {
                ++total;
                if (v(n, i) < 0.0) ++clamped;
            }
        out.bias_var[s] = v.cwiseMax(0.0);
    }
    out.clamp_fraction = total ? static_cast<double>(clamped) / static_cast<double>(total) : 0.0;
    return out;
}

BoundTuning tune_bounds(Posterior& posterior, std::uint64_t seed, int probes, double tolerance, int max_rounds) {
    if (probes < 2) throw InvalidArgument("bound tuning needs at least two probes");
    BoundTuning t;
    double lo = posterior.spec().ln_sigma_lo;
    double hi = posterior.spec().ln_sigma_hi;
    const Eigen::VectorXd c0 = posterior.spec().prior_mean;
    for (int round = 0; round < max_rounds; ++round) {
        posterior.set_bounds(lo, hi);
        auto aem = std::make_shared<const AEMCorrection>(estimate_aem(posterior, posterior.spec().aem_draws, seed));
        posterior.set_aem(aem);
        t.lo = lo;
        t.hi = hi;
        t.rounds = round + 1;
        t.aem = aem;
        t.probes.clear();
        t.fine.clear();
        t.coarse.clear();
        t.max_relative_gap = 0.0;
        double worst_at = lo;
        for (int p = 0; p < probes; ++p) {
            const double ls = lo + (hi - lo) * p / (probes - 1);
            const Eigen::VectorXd th = posterior.theta(c0, ls);
            const double f = posterior.fine(th);
            const double c = posterior.coarse(th);
            const double gap = std::isfinite(f) && std::isfinite(c) ? std::abs(c - f) / std::max(std::abs(f), 1e-300)
                                                                     : kInf;
            t.probes.push_back(ls);
            t.fine.push_back(f);
            t.coarse.push_back(c);
            if (gap > t.max_relative_gap) {
                t.max_relative_gap = gap;
                worst_at = ls;
            }
        }
        if (t.max_relative_gap <= tolerance) {
            t.matched = true;
            break;
        }
        const double width = hi - lo;
        if (worst_at > lo + 0.5 * width)
            hi = lo + 0.5 * width;
        else
            lo = hi - 2.0 * width;
    }
    return t;
}

}  // namespace enor
