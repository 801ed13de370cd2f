#include <doctest.h>

#include "orthodid/simulate.hpp"

#include <random>

using namespace orthodid;

namespace {

ScoreParams<double> params(double theta, double p, double lambda = 0.5) {
    return {theta, p, lambda};
}

NuisanceAt<double> binary(double g, double ell) {
    NuisanceAt<double> nu;
    nu.g = g;
    nu.ell = ell;
    return nu;
}

NuisanceAt<double> multi(double g_w, double g_z, double ell) {
    NuisanceAt<double> nu;
    nu.g_w = g_w;
    nu.g_z = g_z;
    nu.ell = ell;
    return nu;
}

/// Mean of the adjustment term over a population at its true nuisances, and
/// that mean's standard error.
std::pair<double, double> adjustment_mean(const ProbePopulation& pop) {
    const Eigen::Index n = pop.size();
    VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Observation<double> obs;
        obs.outcome = pop.outcome(i);
        obs.target = pop.target;
        NuisanceAt<double> nu;
        nu.ell = pop.ell_true(i);
        if (pop.design == Design::Multilevel) {
            obs.w = pop.w(i);
            nu.g_w = pop.g_true(i);
            nu.g_z = pop.gz_true(i);
        } else {
            obs.d = pop.d(i);
            obs.t = pop.design == Design::RepeatedCrossSection ? pop.t(i) : 0;
            nu.g = pop.g_true(i);
        }
        c(i) = adjustment_term(pop.design, obs, pop.params, nu);
    }
    const double mean = c.mean();
    const double sd = std::sqrt((c.array() - mean).square().sum() / static_cast<double>(n - 1));
    return {mean, sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace

TEST_SUITE("scores") {

TEST_CASE("repeated-outcomes orthogonal score examples") {
    CHECK(score_ro_orthogonal(3.0, 1, params(3.0, 0.5), binary(0.5, 0.0)) == doctest::Approx(3.0));
    CHECK(score_ro_orthogonal(4.0, 1, params(0.0, 0.5), binary(0.2, 1.0)) == doctest::Approx(6.0));
    for (double theta : {-1.0, 0.0, 2.5}) {
        CHECK(score_ro_orthogonal(1.7, 0, params(theta, 0.3), binary(0.4, 1.7)) == doctest::Approx(-theta));
    }
}

TEST_CASE("cross-section orthogonal score examples") {
    CHECK(score_rcs_orthogonal(2.0, 1, 1, params(0.0, 0.5, 0.5), binary(0.5, 0.0)) == doctest::Approx(8.0));
    const double lam = 0.4;
    for (int t : {0, 1}) {
        const double y = 1.3;
        CHECK(score_rcs_orthogonal(y, t, 0, params(2.0, 0.3, lam), binary(0.6, (t - lam) * y)) ==
              doctest::Approx(-2.0));
        for (int d : {0, 1}) {
            CHECK(score_rcs_orthogonal(0.0, t, d, params(1.5, 0.3, lam), binary(0.6, 0.0)) == -1.5);
        }
    }
}

TEST_CASE("multilevel orthogonal score examples") {
    CHECK(score_multi_orthogonal(6.0, 2, 2, params(6.0, 0.4), multi(0.4, 0.3, 0.0)) == doctest::Approx(9.0));
    CHECK(score_multi_orthogonal(6.0, 1, 2, params(6.0, 0.4), multi(0.4, 0.3, 0.0)) == -6.0);
    CHECK(score_multi_orthogonal(2.2, 0, 2, params(1.0, 0.4), multi(0.4, 0.3, 2.2)) == doctest::Approx(-1.0));
}

TEST_CASE("conventional score examples") {
    CHECK(score_ro_conventional(3.0, 1, params(3.0, 0.5), binary(0.5, 0.0)) == doctest::Approx(3.0));
    CHECK(score_ro_conventional(0.0, 0, params(2.0, 0.5), binary(0.3, 0.0)) == -2.0);
}

TEST_CASE("lambda derivative examples") {
    const double y = 1.7;
    const double p = 0.3;
    const double g = 0.25;
    for (int d : {0, 1}) {
        for (int t : {0, 1}) {
            const double expected = -y * (d - g) / (0.25 * p * (1 - g));
            CHECK(score_rcs_lambda_derivative(y, t, d, params(0.0, p, 0.5), binary(g, 0.9)) ==
                  doctest::Approx(expected).epsilon(1e-14));
            CHECK(score_rcs_lambda_derivative(0.0, t, d, params(1.0, p, 0.3), binary(g, 0.0)) == 0.0);
        }
    }
}

TEST_CASE("orthogonal score equals conventional score minus the adjustment") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> share(0.05, 0.95);
    std::normal_distribution<double> value(0.0, 3.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> level(0, 3);
    double worst[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const ScoreParams<double> par{value(rng), share(rng), share(rng)};
        NuisanceAt<double> nu;
        nu.g = share(rng);
        nu.g_w = share(rng);
        nu.g_z = share(rng);
        nu.ell = value(rng);
        Observation<double> obs;
        obs.outcome = value(rng);
        obs.d = coin(rng);
        obs.t = coin(rng);
        obs.w = level(rng);
        obs.target = 2;
        int idx = 0;
        for (Design design : {Design::RepeatedOutcomes, Design::RepeatedCrossSection, Design::Multilevel}) {
            const double orth = score_orthogonal(design, obs, par, nu);
            const double conv = score_conventional(design, obs, par, nu);
            const double adj = adjustment_term(design, obs, par, nu);
            const double scale = 1.0 + std::abs(conv) + std::abs(adj);
            worst[idx] = std::max(worst[idx], std::abs(orth - (conv - adj)) / scale);
            ++idx;
        }
        CHECK(score_ro_orthogonal_expanded(obs.outcome, obs.d, par, nu) ==
              doctest::Approx(score_ro_orthogonal(obs.outcome, obs.d, par, nu)).epsilon(1e-12));
        CHECK(score_rcs_orthogonal_expanded(obs.outcome, obs.t, obs.d, par, nu) ==
              doctest::Approx(score_rcs_orthogonal(obs.outcome, obs.t, obs.d, par, nu)).epsilon(1e-12));
        CHECK(score_multi_orthogonal_expanded(obs.outcome, obs.w, 2, par, nu) ==
              doctest::Approx(score_multi_orthogonal(obs.outcome, obs.w, 2, par, nu)).epsilon(1e-12));
    }
    for (double w : worst) CHECK(w <= 1e-12);
}

TEST_CASE("lambda derivative matches a central difference of the mean score") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif;
    std::normal_distribution<double> n01;
    const int n = 1000;
    std::vector<double> y(n), ell(n), g(n);
    std::vector<int> t(n), d(n);
    for (int i = 0; i < n; ++i) {
        g[i] = 0.1 + 0.8 * unif(rng);
        d[i] = unif(rng) < g[i];
        t[i] = unif(rng) < 0.45;
        y[i] = 1.0 + 2.0 * n01(rng) + 3.0 * d[i] * t[i];
        ell[i] = 0.3 * n01(rng);
    }
    for (double lam : {0.2, 0.45, 0.7}) {
        const double eps = 1e-5;
        auto mean_score = [&](double l) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += score_rcs_orthogonal(y[i], t[i], d[i], params(3.0, 0.4, l), binary(g[i], ell[i]));
            return s / n;
        };
        double analytic = 0.0;
        for (int i = 0; i < n; ++i) {
            analytic += score_rcs_lambda_derivative(y[i], t[i], d[i], params(3.0, 0.4, lam), binary(g[i], ell[i]));
        }
        analytic /= n;
        const double numeric = (mean_score(lam + eps) - mean_score(lam - eps)) / (2.0 * eps);
        CHECK(std::abs(numeric - analytic) <= 1e-6);
    }
}

TEST_CASE("adjustment terms have mean zero at the true nuisances") {
    for (DgpId id : {DgpId::RO_ML, DgpId::RCS_ML, DgpId::MULTI_ML, DgpId::RO_KERNEL, DgpId::RCS_KERNEL,
                     DgpId::MULTI_KERNEL}) {
        CAPTURE(to_string(id));
        const ProbePopulation pop = make_probe_population(id, 100000, 10, 2024);
        const auto [mean, se] = adjustment_mean(pop);
        CHECK(se > 0.0);
        CHECK(std::abs(mean) <= 3.0 * se);
    }
}

TEST_CASE("probe along a zero direction is flat") {
    ProbeDirection none;
    none.propensity_amplitude = 0.0;
    none.outcome_shift = 0.0;
    for (DgpId id : {DgpId::RO_ML, DgpId::RCS_KERNEL, DgpId::MULTI_ML}) {
        const ProbeCurve curve = orthogonality_probe(make_probe_population(id, 10000, 10, 3, none), default_probe_grid());
        REQUIRE(curve.r.size() == 11);
        for (std::size_t k = 1; k < curve.r.size(); ++k) {
            CHECK(curve.m_orthogonal[k] == curve.m_orthogonal[0]);
            CHECK(curve.m_conventional[k] == curve.m_conventional[0]);
        }
        CHECK(curve.derivative_orthogonal == 0.0);
        CHECK(curve.derivative_conventional == 0.0);
    }
}

TEST_CASE("probe separates orthogonal from conventional scores") {
    const ProbeCurve curve =
        orthogonality_probe(make_probe_population(DgpId::RO_ML, 100000, 10, 5), default_probe_grid());
    CHECK(std::abs(curve.derivative_orthogonal) <= 0.02);
    CHECK(std::abs(curve.derivative_conventional) >= 5.0 * std::abs(curve.derivative_orthogonal));
}

TEST_CASE("probe rejects small populations") {
    ProbePopulation pop = make_probe_population(DgpId::RO_ML, 10000, 10, 1);
    pop.outcome.conservativeResize(9999);
    CHECK_THROWS_AS(orthogonality_probe(pop, default_probe_grid()), DataError);
    CHECK_THROWS_AS(make_probe_population(DgpId::RO_ML, 9999, 10, 1), ConfigError);
}

}  // TEST_SUITE
