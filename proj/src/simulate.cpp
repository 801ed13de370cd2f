#include "orthodid/simulate.hpp"

#include "orthodid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <random>

namespace orthodid {

std::string_view to_string(DgpId id) {
    switch (id) {
        case DgpId::RO_ML: return "ro_ml";
        case DgpId::RO_KERNEL: return "ro_kernel";
        case DgpId::RCS_ML: return "rcs_ml";
        case DgpId::RCS_KERNEL: return "rcs_kernel";
        case DgpId::MULTI_ML: return "multi_ml";
        case DgpId::MULTI_KERNEL: return "multi_kernel";
    }
    return "unknown";
}

DgpId parse_dgp(std::string_view text) {
    for (DgpId id : {DgpId::RO_ML, DgpId::RO_KERNEL, DgpId::RCS_ML, DgpId::RCS_KERNEL, DgpId::MULTI_ML,
                     DgpId::MULTI_KERNEL}) {
        if (text == to_string(id)) return id;
    }
    throw ConfigError("unknown dgp '" + std::string(text) + "'");
}

Design design_of(DgpId id) {
    switch (id) {
        case DgpId::RO_ML:
        case DgpId::RO_KERNEL: return Design::RepeatedOutcomes;
        case DgpId::RCS_ML:
        case DgpId::RCS_KERNEL: return Design::RepeatedCrossSection;
        case DgpId::MULTI_ML:
        case DgpId::MULTI_KERNEL: return Design::Multilevel;
    }
    return Design::RepeatedOutcomes;
}

bool is_ml_design(DgpId id) {
    return id == DgpId::RO_ML || id == DgpId::RCS_ML || id == DgpId::MULTI_ML;
}

std::string_view to_string(NoiseConvention c) {
    return c == NoiseConvention::Variance ? "variance" : "sd";
}

NoiseConvention parse_noise_convention(std::string_view text) {
    if (text == "variance") return NoiseConvention::Variance;
    if (text == "sd") return NoiseConvention::StdDev;
    throw ConfigError("unknown noise convention '" + std::string(text) + "' (use variance or sd)");
}

double DgpOptions::noise_sd() const {
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ConfigError("noise scale must be non-negative");
    return convention == NoiseConvention::Variance ? std::sqrt(noise_scale) : noise_scale;
}

namespace {

constexpr double kTheta = 3.0;
constexpr double kThetaLevels[] = {0.0, 3.0, 6.0};
constexpr double kLevelShares[] = {0.3, 0.3, 0.4};

VectorXd gamma0(Eigen::Index p) {
    VectorXd g = VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(5, p); ++j) g(j) = 1.0 / static_cast<double>(j + 1);
    return g;
}

// Separate streams per (seed, design) so data draws never alias the fold shuffles,
// which are seeded from the same replication seed.
std::mt19937_64 make_engine(std::uint64_t seed, DgpId id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      0x6467u + static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

std::vector<std::string> covariate_names(Eigen::Index p) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return names;
}

// P(W = w | x) for the kernel multilevel design: X | W ~ N(W, 1), W uniform.
double kernel_level_probability(double x, int w) {
    double denom = 0.0;
    for (int v = 0; v < 3; ++v) denom += std::exp(-0.5 * (x - v) * (x - v) + 0.5 * x * x);
    return std::exp(-0.5 * (x - w) * (x - w) + 0.5 * x * x) / denom;
}

struct Engine {
    std::mt19937_64 rng;
    double sd;
    std::normal_distribution<double> std_normal{0.0, 1.0};
    std::uniform_real_distribution<double> unit{0.0, 1.0};

    double noise() { return sd * std_normal(rng); }
    double normal() { return std_normal(rng); }
    int bernoulli(double prob) { return unit(rng) < prob ? 1 : 0; }
};

void check_ml_dimension(DgpId id, Eigen::Index p) {
    if (is_ml_design(id) && p < 5) {
        throw ConfigError("p must be at least 5 for " + std::string(to_string(id)));
    }
}

}  // namespace

double true_theta(DgpId id, int target_level) {
    if (design_of(id) != Design::Multilevel) return kTheta;
    if (target_level < 1 || target_level > 2) throw ConfigError("target level must be 1 or 2 for this design");
    return kThetaLevels[target_level];
}

GeneratedData generate_dataset(DgpId id, Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                               const DgpOptions& options, int target_level) {
    if (n < 1) throw ConfigError("n must be positive");
    check_ml_dimension(id, p);
    Engine e{make_engine(seed, id), options.noise_sd()};
    GeneratedData out;
    out.true_theta = true_theta(id, target_level);

    const bool ml = is_ml_design(id);
    const Eigen::Index dim = ml ? p : 1;
    MatrixXd x(n, dim);
    const VectorXd gamma = ml ? gamma0(p) : VectorXd();
    const VectorXd beta = ml ? (gamma.array() + 0.5).matrix() : VectorXd();

    switch (id) {
        case DgpId::RO_ML:
        case DgpId::RO_KERNEL: {
            RepeatedOutcomesData data;
            data.y_pre.resize(n);
            data.y_post.resize(n);
            data.d.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                double base;
                if (ml) {
                    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = e.normal();
                    data.d(i) = e.bernoulli(logistic(x.row(i).dot(gamma)));
                    base = x.row(i).dot(beta);
                } else {
                    data.d(i) = e.bernoulli(0.5);
                    x(i, 0) = data.d(i) + e.normal();
                    base = 0.0;
                }
                const double y00 = base + e.noise();
                const double trend = ml ? 1.0 : x(i, 0);
                const double y01 = y00 + trend + e.noise();
                const double y11 = kTheta + y01 + e.noise();
                data.y_pre(i) = y00;
                data.y_post(i) = data.d(i) == 1 ? y11 : y01;
            }
            data.x = CovariateMatrix(std::move(x), covariate_names(dim));
            out.data = std::move(data);
            break;
        }
        case DgpId::RCS_ML:
        case DgpId::RCS_KERNEL: {
            RepeatedCrossSectionData data;
            data.y.resize(n);
            data.t.resize(n);
            data.d.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (ml) {
                    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = 0.3 + e.normal();
                    data.d(i) = e.bernoulli(logistic(x.row(i).dot(gamma)));
                } else {
                    data.d(i) = e.bernoulli(0.5);
                    x(i, 0) = data.d(i) + e.normal();
                }
                const double y00 = (ml ? 1.0 : 0.0) + e.noise();
                const double trend = ml ? 1.0 : x(i, 0);
                const double y01 = y00 + trend + e.noise();
                const double y11 = kTheta + y01 + e.noise();
                const double y1 = data.d(i) == 1 ? y11 : y01;
                data.t(i) = e.bernoulli(0.5);
                data.y(i) = y00 + data.t(i) * (y1 - y00);
            }
            data.x = CovariateMatrix(std::move(x), covariate_names(dim));
            out.data = std::move(data);
            break;
        }
        case DgpId::MULTI_ML:
        case DgpId::MULTI_KERNEL: {
            MultilevelData data;
            data.y_pre.resize(n);
            data.y_post.resize(n);
            data.w.resize(n);
            data.levels = 2;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double u = e.unit(e.rng);
                double base = 0.0;
                if (ml) {
                    data.w(i) = u < kLevelShares[0] ? 0 : (u < kLevelShares[0] + kLevelShares[1] ? 1 : 2);
                    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = e.normal();
                    base = x.row(i).dot(beta);
                } else {
                    data.w(i) = std::min(2, static_cast<int>(u * 3.0));
                    x(i, 0) = data.w(i) + e.normal();
                }
                const double y00 = base + e.noise();
                const double trend = ml ? 1.0 : x(i, 0);
                const double y01 = y00 + trend + e.noise();
                const double y11 = kThetaLevels[1] + y01 + e.noise();
                const double y21 = kThetaLevels[2] + y01 + e.noise();
                data.y_pre(i) = y00;
                data.y_post(i) = data.w(i) == 0 ? y01 : (data.w(i) == 1 ? y11 : y21);
            }
            data.x = CovariateMatrix(std::move(x), covariate_names(dim));
            out.data = std::move(data);
            break;
        }
    }
    return out;
}

InjectedNuisances true_nuisances(DgpId id, int target_level) {
    InjectedNuisances nu;
    switch (id) {
        case DgpId::RO_ML:
        case DgpId::RCS_ML:
            nu.propensity = [](RowConstRef x) { return logistic(x.dot(gamma0(x.size()).transpose())); };
            nu.outcome = [id](RowConstRef) { return id == DgpId::RO_ML ? 1.0 : 0.25; };
            break;
        case DgpId::RO_KERNEL:
        case DgpId::RCS_KERNEL:
            nu.propensity = [](RowConstRef x) { return logistic(x(0) - 0.5); };
            nu.outcome = [id](RowConstRef x) { return id == DgpId::RO_KERNEL ? x(0) : 0.25 * x(0); };
            break;
        case DgpId::MULTI_ML:
            if (target_level < 1 || target_level > 2) throw ConfigError("target level must be 1 or 2");
            nu.propensity = [target_level](RowConstRef) { return kLevelShares[target_level]; };
            nu.control_propensity = [](RowConstRef) { return kLevelShares[0]; };
            nu.outcome = [](RowConstRef) { return 1.0; };
            break;
        case DgpId::MULTI_KERNEL:
            if (target_level < 1 || target_level > 2) throw ConfigError("target level must be 1 or 2");
            nu.propensity = [target_level](RowConstRef x) { return kernel_level_probability(x(0), target_level); };
            nu.control_propensity = [](RowConstRef x) { return kernel_level_probability(x(0), 0); };
            nu.outcome = [](RowConstRef x) { return x(0); };
            break;
    }
    return nu;
}

ProbePopulation make_probe_population(DgpId id, Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                      const ProbeDirection& direction, const DgpOptions& options,
                                      int target_level) {
    if (n < kMinProbePopulation) throw ConfigError("probe population must contain at least 10000 draws");
    if (!(direction.clip_lo > 0.0 && direction.clip_lo < direction.clip_hi && direction.clip_hi < 1.0)) {
        throw ConfigError("probe clip bounds must satisfy 0 < lo < hi < 1");
    }
    const GeneratedData gen = generate_dataset(id, n, p, seed, options, target_level);
    const InjectedNuisances truth = true_nuisances(id, target_level);
    const CovariateMatrix& cov = covariates_of(gen.data);
    const MatrixXd& x = cov.values;

    ProbePopulation pop;
    pop.design = design_of(id);
    pop.target = target_level;
    pop.params.theta = gen.true_theta;
    pop.g_true.resize(n);
    pop.ell_true.resize(n);
    pop.g_alt.resize(n);
    pop.ell_alt.resize(n);
    auto perturb = [&](double g, double x1) {
        if (direction.propensity_amplitude == 0.0) return g;  // a zero direction leaves g untouched
        return std::clamp(g + direction.propensity_amplitude * std::sin(x1), direction.clip_lo, direction.clip_hi);
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        pop.g_true(i) = truth.propensity(x.row(i));
        pop.ell_true(i) = truth.outcome(x.row(i));
        pop.g_alt(i) = perturb(pop.g_true(i), x(i, 0));
        pop.ell_alt(i) = pop.ell_true(i) + direction.outcome_shift;
    }
    if (const auto* ro = std::get_if<RepeatedOutcomesData>(&gen.data)) {
        pop.outcome = ro->delta_y();
        pop.d = ro->d;
        pop.params.p = ro->d.cast<double>().mean();
    } else if (const auto* rcs = std::get_if<RepeatedCrossSectionData>(&gen.data)) {
        pop.outcome = rcs->y;
        pop.d = rcs->d;
        pop.t = rcs->t;
        pop.params.p = rcs->d.cast<double>().mean();
        pop.params.lambda = rcs->t.cast<double>().mean();
    } else {
        const auto& multi = std::get<MultilevelData>(gen.data);
        pop.outcome = multi.delta_y();
        pop.w = multi.w;
        pop.params.p = (multi.w.array() == target_level).cast<double>().mean();
        pop.gz_true.resize(n);
        pop.gz_alt.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            pop.gz_true(i) = truth.control_propensity(x.row(i));
            pop.gz_alt(i) = perturb(pop.gz_true(i), x(i, 0));
        }
    }
    return pop;
}

McSummary summarize_estimates(const std::vector<double>& estimates, const std::vector<double>& ses,
                              double true_theta) {
    if (estimates.size() != ses.size()) throw ConfigError("estimates and standard errors differ in length");
    if (estimates.empty()) throw ConfigError("at least one estimate is required");
    McSummary s;
    s.estimates = estimates;
    s.ses = ses;
    s.true_theta = true_theta;
    s.replicates.resize(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) s.replicates[i] = static_cast<int>(i);
    const auto r = static_cast<double>(estimates.size());
    double sum = 0.0;
    double se_sum = 0.0;
    int covered = 0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        sum += estimates[i];
        se_sum += ses[i];
        if (std::abs(estimates[i] - true_theta) <= 1.96 * ses[i]) ++covered;
    }
    s.mean = sum / r;
    s.bias = s.mean - true_theta;
    double ss = 0.0;
    for (double v : estimates) ss += (v - s.mean) * (v - s.mean);
    s.degenerate = estimates.size() < 2;
    s.sd = s.degenerate ? 0.0 : std::sqrt(ss / (r - 1.0));
    double sq = 0.0;
    for (double v : estimates) sq += (v - true_theta) * (v - true_theta);
    s.rmse = std::sqrt(sq / r);
    s.coverage_95 = covered / r;
    s.mean_se = se_sum / r;
    return s;
}

std::string_view to_string(EstimatorMode mode) {
    switch (mode) {
        case EstimatorMode::Orthogonal: return "orthogonal";
        case EstimatorMode::Conventional: return "conventional";
        case EstimatorMode::Both: return "both";
    }
    return "unknown";
}

McRun run_monte_carlo(const McConfig& config) {
    if (config.replications < 1) throw ConfigError("replications must be at least 1");
    check_ml_dimension(config.dgp, config.p);
    EstimatorSpec base = config.estimator;
    base.design = design_of(config.dgp);
    base.validate();
    const bool want_orth = config.mode != EstimatorMode::Conventional;
    const bool want_conv = config.mode != EstimatorMode::Orthogonal;
    const int target = base.target_level;
    const double theta0 = true_theta(config.dgp, target);

    struct Slot {
        std::optional<std::pair<double, double>> orth;
        std::optional<std::pair<double, double>> conv;
    };
    const auto r = static_cast<std::size_t>(config.replications);
    std::vector<Slot> slots(r);
    parallel_for(r, config.threads, [&](std::size_t i) {
        const std::uint64_t seed = config.seed + i;
        const GeneratedData gen = generate_dataset(config.dgp, config.n, config.p, seed, config.dgp_options, target);
        EstimatorSpec spec = base;
        spec.seed = seed;
        if (want_orth) {
            try {
                const AttResult res = estimate(gen.data, spec);
                slots[i].orth = std::make_pair(res.theta_hat, res.se);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error&) {
            }
        }
        if (want_conv) {
            try {
                const AttResult res = estimate_conventional(gen.data, spec);
                slots[i].conv = std::make_pair(res.theta_hat, res.se);
            } catch (const ConfigError&) {
                throw;
            } catch (const Error&) {
            }
        }
    });

    auto reduce = [&](bool orth) {
        std::vector<double> est;
        std::vector<double> ses;
        std::vector<int> ids;
        for (std::size_t i = 0; i < r; ++i) {
            const auto& v = orth ? slots[i].orth : slots[i].conv;
            if (!v) continue;
            est.push_back(v->first);
            ses.push_back(v->second);
            ids.push_back(static_cast<int>(i));
        }
        if (est.empty()) {
            throw EstimationError(std::string("every replication of the ") + (orth ? "orthogonal" : "conventional") +
                                  " estimator failed");
        }
        McSummary s = summarize_estimates(est, ses, theta0);
        s.replicates = std::move(ids);
        s.n_failed = static_cast<int>(r - est.size());
        return s;
    };
    McRun run;
    if (want_orth) run.orthogonal = reduce(true);
    if (want_conv) run.conventional = reduce(false);
    return run;
}

Histogram make_histogram(const std::vector<double>& values, int bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    if (values.empty()) throw ConfigError("histogram needs at least one value");
    Histogram h;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.lo = *mn;
    h.hi = *mx;
    const double width = (h.hi - h.lo) / bins;
    for (int b = 0; b <= bins; ++b) h.edges.push_back(h.lo + width * b);
    h.edges.back() = h.hi;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = width > 0.0 ? static_cast<int>((v - h.lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

void write_estimates_csv(std::ostream& out, const McSummary& summary) {
    out << "replicate,estimate,se,covered\n";
    char buf[96];
    for (std::size_t i = 0; i < summary.estimates.size(); ++i) {
        const bool covered = std::abs(summary.estimates[i] - summary.true_theta) <= 1.96 * summary.ses[i];
        const int id = i < summary.replicates.size() ? summary.replicates[i] : static_cast<int>(i);
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", id, summary.estimates[i], summary.ses[i],
                      covered ? 1 : 0);
        out << buf;
    }
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ORTHODID_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw ConfigError("ORTHODID_THREADS must be a positive integer");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace orthodid
