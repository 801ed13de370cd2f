#include "orthodid/scores.hpp"

namespace orthodid {

namespace {

struct MeanScores {
    double orthogonal = 0.0;
    double conventional = 0.0;
};

MeanScores mean_scores_at(const ProbePopulation& pop, double r) {
    double orth = 0.0;
    double conv = 0.0;
    const Eigen::Index n = pop.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        NuisanceAt<double> nu;
        const double g = pop.g_true(i) + r * (pop.g_alt(i) - pop.g_true(i));
        nu.ell = pop.ell_true(i) + r * (pop.ell_alt(i) - pop.ell_true(i));
        Observation<double> obs;
        obs.outcome = pop.outcome(i);
        obs.target = pop.target;
        if (pop.design == Design::Multilevel) {
            nu.g_w = g;
            nu.g_z = pop.gz_true(i) + r * (pop.gz_alt(i) - pop.gz_true(i));
            obs.w = pop.w(i);
        } else {
            nu.g = g;
            obs.d = pop.d(i);
            if (pop.design == Design::RepeatedCrossSection) obs.t = pop.t(i);
        }
        orth += score_orthogonal(pop.design, obs, pop.params, nu);
        conv += score_conventional(pop.design, obs, pop.params, nu);
    }
    return {orth / static_cast<double>(n), conv / static_cast<double>(n)};
}

}  // namespace

std::vector<double> default_probe_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.01 * i);
    return grid;
}

ProbeCurve orthogonality_probe(const ProbePopulation& pop, const std::vector<double>& r_grid, double step) {
    if (pop.size() < kMinProbePopulation) {
        throw DataError("probe population must contain at least 10000 draws");
    }
    if (!(step > 0.0)) throw ConfigError("probe step must be positive");
    ProbeCurve curve;
    for (double r : r_grid) {
        const auto m = mean_scores_at(pop, r);
        curve.r.push_back(r);
        curve.m_orthogonal.push_back(m.orthogonal);
        curve.m_conventional.push_back(m.conventional);
    }
    const auto plus = mean_scores_at(pop, step);
    const auto minus = mean_scores_at(pop, -step);
    curve.derivative_orthogonal = (plus.orthogonal - minus.orthogonal) / (2.0 * step);
    curve.derivative_conventional = (plus.conventional - minus.conventional) / (2.0 * step);
    return curve;
}

}  // namespace orthodid
