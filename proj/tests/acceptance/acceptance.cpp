// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion plus
// informational lines, and exits non-zero when any criterion fails.

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "orthodid/parallel.hpp"
#include "orthodid/simulate.hpp"

#include <chrono>
#include <cstdio>
#include <string>

using namespace orthodid;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void info(const std::string& detail) {
    std::printf("INFO %s\n", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string describe(const char* label, const McSummary& s) {
    return fmt("%s mean=%.4f bias=%+.4f sd=%.4f mean_se=%.4f coverage=%.3f failed=%d", label, s.mean, s.bias, s.sd,
               s.mean_se, s.coverage_95, s.n_failed);
}

double se_ratio(const McSummary& s) { return s.mean_se / s.sd; }

McConfig base_config(DgpId dgp, Eigen::Index n, Eigen::Index p, int r, std::uint64_t seed) {
    McConfig cfg;
    cfg.dgp = dgp;
    cfg.n = n;
    cfg.p = p;
    cfg.replications = r;
    cfg.seed = seed;
    cfg.threads = resolve_threads(0);
    return cfg;
}

McConfig kernel_config(double clip) {
    McConfig cfg = base_config(DgpId::RCS_KERNEL, 200, 1, 200, 2000);
    cfg.mode = EstimatorMode::Both;
    cfg.estimator.propensity_learner = learner_spec(LearnerKind::Kernel);
    cfg.estimator.outcome_learner = learner_spec(LearnerKind::Kernel);
    cfg.estimator.clip = clip;
    return cfg;
}

std::pair<double, double> mean_and_se(const VectorXd& v) {
    const double mean = v.mean();
    const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

VectorXd adjustments(const ProbePopulation& pop) {
    VectorXd c(pop.size());
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
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
            if (pop.design == Design::RepeatedCrossSection) obs.t = pop.t(i);
            nu.g = pop.g_true(i);
        }
        c(i) = adjustment_term(pop.design, obs, pop.params, nu);
    }
    return c;
}

}  // namespace

int main() {
    info(fmt("worker threads: %d", resolve_threads(0)));

    // 1. Repeated outcomes, high-dimensional controls, paired estimators.
    McRun ro;
    {
        Stopwatch clock;
        McConfig cfg = base_config(DgpId::RO_ML, 200, 100, 500, 1000);
        cfg.mode = EstimatorMode::Both;
        ro = run_monte_carlo(cfg);
        const McSummary& o = *ro.orthogonal;
        const McSummary& c = *ro.conventional;
        info(describe("ro_ml orthogonal", o));
        info(describe("ro_ml conventional", c));
        info(fmt("ro_ml runtime %.1f s", clock.seconds()));
        const bool pass = std::abs(o.bias) <= 0.15 && o.coverage_95 >= 0.88 && o.coverage_95 <= 0.99 &&
                          std::abs(c.bias) >= 2.0 * std::abs(o.bias);
        report(1, pass,
               fmt("RO_ML N=200 p=100 R=500: |bias_orth|=%.4f (<=0.15), coverage=%.3f (in [0.88,0.99]), "
                   "|bias_conv|=%.4f (>= 2x = %.4f)",
                   std::abs(o.bias), o.coverage_95, std::abs(c.bias), 2.0 * std::abs(o.bias)));
    }

    // 2. Repeated cross sections with kernel learners.
    McRun rcs;
    {
        Stopwatch clock;
        rcs = run_monte_carlo(kernel_config(0.05));
        const McSummary& o = *rcs.orthogonal;
        const McSummary& c = *rcs.conventional;
        info(describe("rcs_kernel orthogonal (clip 0.05)", o));
        info(describe("rcs_kernel conventional (clip 0.05)", c));
        info(fmt("rcs_kernel runtime %.1f s", clock.seconds()));
        const bool pass = std::abs(o.bias) <= 0.15 && std::abs(c.bias) >= 2.0 * std::abs(o.bias);
        report(2, pass,
               fmt("RCS_KERNEL N=200 R=200 clip=0.05: |bias_orth|=%.4f (<=0.15), |bias_conv|=%.4f (>= 2x = %.4f)",
                   std::abs(o.bias), std::abs(c.bias), 2.0 * std::abs(o.bias)));

        Stopwatch tight;
        const McRun loose = run_monte_carlo(kernel_config(0.01));
        info(describe("rcs_kernel orthogonal (clip 0.01)", *loose.orthogonal) +
             fmt(" se/sd=%.3f", se_ratio(*loose.orthogonal)));
        info(describe("rcs_kernel conventional (clip 0.01)", *loose.conventional));
        info(fmt("rcs_kernel clip 0.01 runtime %.1f s", tight.seconds()));
    }

    // 3. Multilevel treatment, target level 2.
    McRun multi;
    {
        Stopwatch clock;
        McConfig cfg = base_config(DgpId::MULTI_ML, 200, 100, 200, 3000);
        cfg.estimator.target_level = 2;
        multi = run_monte_carlo(cfg);
        const McSummary& o = *multi.orthogonal;
        info(describe("multi_ml orthogonal", o));
        info(fmt("multi_ml runtime %.1f s", clock.seconds()));
        report(3, std::abs(o.bias) <= 0.2,
               fmt("MULTI_ML N=200 p=100 R=200 target 2: theta0=%.1f |bias|=%.4f (<=0.2)", o.true_theta,
                   std::abs(o.bias)));
    }

    // 4. Standard-error calibration on the three orthogonal runs.
    {
        const double r1 = se_ratio(*ro.orthogonal);
        const double r2 = se_ratio(*rcs.orthogonal);
        const double r3 = se_ratio(*multi.orthogonal);
        auto ok = [](double r) { return r >= 0.85 && r <= 1.15; };
        report(4, ok(r1) && ok(r2) && ok(r3),
               fmt("mean(se)/sd in [0.85,1.15]: ro_ml=%.3f rcs_kernel=%.3f multi_ml=%.3f", r1, r2, r3));
    }

    // 5. Orthogonality probe.
    {
        Stopwatch clock;
        const ProbeCurve curve =
            orthogonality_probe(make_probe_population(DgpId::RO_ML, 100000, 100, 5000), default_probe_grid());
        const double orth = std::abs(curve.derivative_orthogonal);
        const double conv = std::abs(curve.derivative_conventional);
        info(fmt("probe runtime %.1f s", clock.seconds()));
        report(5, orth <= 0.02 && conv >= 5.0 * orth,
               fmt("RO_ML population 1e5: |M'_orth(0)|=%.5f (<=0.02), |M'_conv(0)|=%.5f (>= 5x = %.5f)", orth, conv,
                   5.0 * orth));
    }

    // 6. Adjustment terms have mean zero at the true nuisances.
    {
        bool pass = true;
        std::string detail;
        const std::pair<const char*, DgpId> cases[] = {
            {"c1", DgpId::RO_ML}, {"c2", DgpId::RCS_ML}, {"c_w", DgpId::MULTI_ML}};
        std::uint64_t seed = 6000;
        for (const auto& [name, id] : cases) {
            const auto [mean, se] = mean_and_se(adjustments(make_probe_population(id, 100000, 100, seed++)));
            pass = pass && std::abs(mean) <= 3.0 * se;
            detail += fmt("%s mean=%+.5f se=%.5f (|t|=%.2f); ", name, mean, se, std::abs(mean) / se);
        }
        report(6, pass, detail + "each within 3 se of 0 over 1e5 draws");
    }

    // 7. Lasso optimality and least-squares limit.
    {
        std::mt19937_64 rng(7000);
        std::normal_distribution<double> n01;
        double worst_kkt = 0.0;
        double worst_ols = 0.0;
        bool all_converged = true;
        for (int rep = 0; rep < 100; ++rep) {
            const MatrixXd q = oracle::gaussian_matrix(50, 10, rng);
            VectorXd y(50);
            for (Eigen::Index i = 0; i < 50; ++i) y(i) = 0.5 + q(i, 0) - 0.8 * q(i, 1) + 0.3 * q(i, 4) + n01(rng);
            const auto penalty = compute_penalty_loadings(q, y, 1.1, 0.1 / std::log(50.0), 2);
            const LinearFit fit = fit_lasso(q, y, penalty.lambda, penalty.loadings);
            all_converged = all_converged && fit.converged;
            worst_kkt = std::max(worst_kkt, oracle::lasso_kkt_violation(q, y, fit));

            const LinearFit ls = fit_lasso(q, y, 0.0, VectorXd::Ones(10));
            const VectorXd ref = oracle::ols_with_intercept(q, y);
            worst_ols = std::max({worst_ols, std::abs(ls.intercept - ref(0)),
                                  (ls.coefficients - ref.tail(10)).lpNorm<Eigen::Infinity>()});
        }
        report(7, all_converged && worst_kkt <= 1e-6 && worst_ols <= 1e-6,
               fmt("100 instances M=50 p=10: max KKT residual=%.2e (<=1e-6), max |b - b_ols|=%.2e (<=1e-6)",
                   worst_kkt, worst_ols));
    }

    // 8. Post-period share derivative against a central difference.
    {
        double worst = 0.0;
        for (std::uint64_t seed = 8000; seed < 8005; ++seed) {
            const GeneratedData gen = generate_dataset(DgpId::RCS_ML, 1000, 10, seed);
            const auto& data = std::get<RepeatedCrossSectionData>(gen.data);
            const InjectedNuisances truth = true_nuisances(DgpId::RCS_ML);
            const double p = data.d.cast<double>().mean();
            const double lam = data.t.cast<double>().mean();
            auto mean_at = [&](double l, bool derivative) {
                const ScoreParams<double> par{3.0, p, l};
                double sum = 0.0;
                for (Eigen::Index i = 0; i < data.size(); ++i) {
                    const NuisanceAt<double> nu{truth.propensity(data.x.values.row(i)),
                                                truth.outcome(data.x.values.row(i))};
                    sum += derivative ? score_rcs_lambda_derivative(data.y(i), data.t(i), data.d(i), par, nu)
                                      : score_rcs_orthogonal(data.y(i), data.t(i), data.d(i), par, nu);
                }
                return sum / static_cast<double>(data.size());
            };
            const double eps = 1e-5;
            const double numeric = (mean_at(lam + eps, false) - mean_at(lam - eps, false)) / (2.0 * eps);
            worst = std::max(worst, std::abs(numeric - mean_at(lam, true)));
        }
        report(8, worst <= 1e-6,
               fmt("RCS_ML samples N=1000 (5 seeds): max |analytic - central difference|=%.2e (<=1e-6)", worst));
    }

    // 9. Injected true nuisances on noiseless data.
    {
        const auto binary = fixture::binary_truth();
        const auto zero_level = fixture::binary_truth(false);
        const auto levels = fixture::multilevel_truth();
        CrossfitOptions opts;
        opts.folds = fixture::balanced_plan();
        EstimatorSpec spec;
        spec.k_folds = fixture::kFolds;
        double worst = 0.0;
        for (double theta : {3.0, -2.0, 6.0}) {
            spec.design = Design::RepeatedOutcomes;
            opts.inject = &binary;
            worst = std::max(worst, std::abs(estimate_ro(fixture::repeated_outcomes(theta, 9), spec, opts).theta_hat -
                                             theta));
            spec.design = Design::RepeatedCrossSection;
            opts.inject = &zero_level;
            worst = std::max(worst, std::abs(estimate_rcs(fixture::cross_sections(theta, 9), spec, opts).theta_hat -
                                             theta));
            spec.design = Design::Multilevel;
            spec.target_level = 2;
            opts.inject = &levels;
            worst = std::max(worst, std::abs(estimate_multi(fixture::multilevel(theta, 9), spec, opts).theta_hat -
                                             theta));
        }
        report(9, worst <= 1e-10,
               fmt("repeated outcomes, cross sections, multilevel: max |theta_hat - theta0|=%.2e (<=1e-10)", worst));
    }

    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ALL PASSED" : "FAILED", failures);
    return failures == 0 ? 0 : 1;
}
