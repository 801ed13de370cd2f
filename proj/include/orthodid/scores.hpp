#pragma once

// Pointwise DID scores. Each *_orthogonal score equals the corresponding
// conventional (inverse-propensity) score minus a zero-mean adjustment term;
// both forms are provided so callers and tests can check the identity.

#include "orthodid/core.hpp"

#include <vector>

namespace orthodid {

template <class Scalar>
struct ScoreParams {
    Scalar theta{};   // candidate ATT
    Scalar p{};       // treated share P(D = 1) or P(W = w)
    Scalar lambda{};  // post-period share P(T = 1), cross sections only
};

/// Nuisance values at one covariate point. Multilevel uses g_w (target level),
/// g_z (untreated level) and ell; the binary designs use g and ell.
template <class Scalar>
struct NuisanceAt {
    Scalar g{};
    Scalar ell{};
    Scalar g_w{};
    Scalar g_z{};
};

// --- repeated outcomes -------------------------------------------------------

template <class Scalar>
Scalar score_ro_orthogonal(Scalar delta_y, int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    return (Scalar(d) - nu.g) / (par.p * (Scalar(1) - nu.g)) * (delta_y - nu.ell) - par.theta;
}

template <class Scalar>
Scalar score_ro_conventional(Scalar delta_y, int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    return delta_y / par.p * (Scalar(d) - nu.g) / (Scalar(1) - nu.g) - par.theta;
}

/// c1 = (D - g) / (p (1 - g)) * ell
template <class Scalar>
Scalar adjustment_ro(int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    return (Scalar(d) - nu.g) / (par.p * (Scalar(1) - nu.g)) * nu.ell;
}

/// Expanded form: conventional score minus c1.
template <class Scalar>
Scalar score_ro_orthogonal_expanded(Scalar delta_y, int d, const ScoreParams<Scalar>& par,
                                    const NuisanceAt<Scalar>& nu) {
    return score_ro_conventional(delta_y, d, par, nu) - adjustment_ro(d, par, nu);
}

// --- repeated cross sections -------------------------------------------------

template <class Scalar>
Scalar score_rcs_orthogonal(Scalar y, int t, int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    const Scalar lam = par.lambda;
    return (Scalar(d) - nu.g) / (par.p * lam * (Scalar(1) - lam) * (Scalar(1) - nu.g)) *
               ((Scalar(t) - lam) * y - nu.ell) -
           par.theta;
}

template <class Scalar>
Scalar score_rcs_conventional(Scalar y, int t, int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    const Scalar lam = par.lambda;
    return (Scalar(t) - lam) / (lam * (Scalar(1) - lam)) * y / par.p * (Scalar(d) - nu.g) / (Scalar(1) - nu.g) -
           par.theta;
}

/// c2 = (D - g) / (lambda (1 - lambda) p (1 - g)) * ell
template <class Scalar>
Scalar adjustment_rcs(int d, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    const Scalar lam = par.lambda;
    return (Scalar(d) - nu.g) / (lam * (Scalar(1) - lam) * par.p * (Scalar(1) - nu.g)) * nu.ell;
}

template <class Scalar>
Scalar score_rcs_orthogonal_expanded(Scalar y, int t, int d, const ScoreParams<Scalar>& par,
                                     const NuisanceAt<Scalar>& nu) {
    return score_rcs_conventional(y, t, d, par, nu) - adjustment_rcs(d, par, nu);
}

/// Derivative of the cross-section orthogonal score in lambda, holding ell fixed.
/// Its sample mean over a fold estimates G_{2,lambda} in the variance formula.
template <class Scalar>
Scalar score_rcs_lambda_derivative(Scalar y, int t, int d, const ScoreParams<Scalar>& par,
                                   const NuisanceAt<Scalar>& nu) {
    const Scalar lam = par.lambda;
    const Scalar one_minus = Scalar(1) - lam;
    const Scalar ratio = (Scalar(d) - nu.g) / (Scalar(1) - nu.g);
    return -(Scalar(1) - Scalar(2) * lam) / (lam * lam * one_minus * one_minus) * ratio / par.p *
               ((Scalar(t) - lam) * y - nu.ell) -
           y / (par.p * lam * one_minus) * ratio;
}

// --- multilevel --------------------------------------------------------------

template <class Scalar>
Scalar multilevel_weight(int w, int target, const NuisanceAt<Scalar>& nu) {
    return (w == target ? nu.g_z : Scalar(0)) - (w == 0 ? nu.g_w : Scalar(0));
}

template <class Scalar>
Scalar score_multi_orthogonal(Scalar delta_y, int w, int target, const ScoreParams<Scalar>& par,
                              const NuisanceAt<Scalar>& nu) {
    return multilevel_weight(w, target, nu) / (par.p * nu.g_z) * (delta_y - nu.ell) - par.theta;
}

template <class Scalar>
Scalar score_multi_conventional(Scalar delta_y, int w, int target, const ScoreParams<Scalar>& par,
                                const NuisanceAt<Scalar>& nu) {
    return delta_y / par.p * multilevel_weight(w, target, nu) / nu.g_z - par.theta;
}

/// c_w = (1{W=w} g_z - 1{W=0} g_w) / (p g_z) * ell
template <class Scalar>
Scalar adjustment_multi(int w, int target, const ScoreParams<Scalar>& par, const NuisanceAt<Scalar>& nu) {
    return multilevel_weight(w, target, nu) / (par.p * nu.g_z) * nu.ell;
}

template <class Scalar>
Scalar score_multi_orthogonal_expanded(Scalar delta_y, int w, int target, const ScoreParams<Scalar>& par,
                                       const NuisanceAt<Scalar>& nu) {
    return score_multi_conventional(delta_y, w, target, par, nu) - adjustment_multi(w, target, par, nu);
}

// --- design dispatch ---------------------------------------------------------

/// One observation in any design. `outcome` is delta Y for repeated outcomes and
/// multilevel data, and Y for cross sections.
template <class Scalar>
struct Observation {
    Scalar outcome{};
    int d = 0;
    int t = 0;
    int w = 0;
    int target = 1;
};

template <class Scalar>
Scalar score_conventional(Design design, const Observation<Scalar>& obs, const ScoreParams<Scalar>& par,
                          const NuisanceAt<Scalar>& nu) {
    switch (design) {
        case Design::RepeatedOutcomes: return score_ro_conventional(obs.outcome, obs.d, par, nu);
        case Design::RepeatedCrossSection: return score_rcs_conventional(obs.outcome, obs.t, obs.d, par, nu);
        case Design::Multilevel: return score_multi_conventional(obs.outcome, obs.w, obs.target, par, nu);
    }
    return Scalar(0);
}

template <class Scalar>
Scalar score_orthogonal(Design design, const Observation<Scalar>& obs, const ScoreParams<Scalar>& par,
                        const NuisanceAt<Scalar>& nu) {
    switch (design) {
        case Design::RepeatedOutcomes: return score_ro_orthogonal(obs.outcome, obs.d, par, nu);
        case Design::RepeatedCrossSection: return score_rcs_orthogonal(obs.outcome, obs.t, obs.d, par, nu);
        case Design::Multilevel: return score_multi_orthogonal(obs.outcome, obs.w, obs.target, par, nu);
    }
    return Scalar(0);
}

template <class Scalar>
Scalar adjustment_term(Design design, const Observation<Scalar>& obs, const ScoreParams<Scalar>& par,
                       const NuisanceAt<Scalar>& nu) {
    switch (design) {
        case Design::RepeatedOutcomes: return adjustment_ro(obs.d, par, nu);
        case Design::RepeatedCrossSection: return adjustment_rcs(obs.d, par, nu);
        case Design::Multilevel: return adjustment_multi(obs.w, obs.target, par, nu);
    }
    return Scalar(0);
}

// --- orthogonality probe -----------------------------------------------------

/// A synthetic population evaluated at the true nuisances (`*_true`) together
/// with a second nuisance realisation (`*_alt`) that defines the direction.
struct ProbePopulation {
    Design design = Design::RepeatedOutcomes;
    VectorXd outcome;  // delta Y, or Y for cross sections
    VectorXi d;
    VectorXi t;
    VectorXi w;
    int target = 1;
    ScoreParams<double> params;
    VectorXd g_true, ell_true, gz_true;  // g_true holds g_w for multilevel data
    VectorXd g_alt, ell_alt, gz_alt;

    Eigen::Index size() const { return outcome.size(); }
};

struct ProbeCurve {
    std::vector<double> r;
    std::vector<double> m_orthogonal;
    std::vector<double> m_conventional;
    double derivative_orthogonal = 0.0;
    double derivative_conventional = 0.0;
};

inline constexpr Eigen::Index kMinProbePopulation = 10000;

/// Mean score at eta0 + r (eta - eta0) for each r in the grid, with central
/// differences at r = 0 using `step`. Throws DataError below 10^4 draws.
ProbeCurve orthogonality_probe(const ProbePopulation& pop, const std::vector<double>& r_grid,
                               double step = 0.01);

/// Default grid {0, 0.01, ..., 0.1}.
std::vector<double> default_probe_grid();

}  // namespace orthodid
