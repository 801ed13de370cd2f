#pragma once

// Data-generating processes for the simulation designs and a Monte Carlo
// runner that reports bias, dispersion and interval coverage.

#include "orthodid/crossfit.hpp"
#include "orthodid/data.hpp"
#include "orthodid/scores.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace orthodid {

enum class DgpId { RO_ML, RO_KERNEL, RCS_ML, RCS_KERNEL, MULTI_ML, MULTI_KERNEL };
std::string_view to_string(DgpId id);
DgpId parse_dgp(std::string_view text);
Design design_of(DgpId id);
bool is_ml_design(DgpId id);

/// How the noise scale 0.1 in N(0, 0.1) is read.
enum class NoiseConvention { Variance, StdDev };
std::string_view to_string(NoiseConvention c);
NoiseConvention parse_noise_convention(std::string_view text);

struct DgpOptions {
    NoiseConvention convention = NoiseConvention::Variance;
    double noise_scale = 0.1;

    double noise_sd() const;
};

struct GeneratedData {
    Dataset data;
    double true_theta = 0.0;  // ATT for the reported target level
};

/// Draws n observations. `p` is the covariate dimension for ML designs (p >= 5)
/// and is ignored for kernel designs (scalar X). Multilevel designs report the
/// ATT of `target_level`.
GeneratedData generate_dataset(DgpId id, Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                               const DgpOptions& options = {}, int target_level = 2);

double true_theta(DgpId id, int target_level = 2);

/// The true nuisance functions of a design at one covariate row. For
/// multilevel designs `propensity` is P(W = target | x) and
/// `control_propensity` is P(W = 0 | x).
InjectedNuisances true_nuisances(DgpId id, int target_level = 2);

struct ProbeDirection {
    double propensity_amplitude = 0.1;  // g_alt = clip(g0 + a sin(x1), lo, hi); a = 0 gives g_alt = g0
    double outcome_shift = 0.5;         // ell_alt = ell0 + b
    double clip_lo = 0.05;
    double clip_hi = 0.95;
};

/// A synthetic population at the true nuisances plus the perturbed direction.
/// Shares p and lambda are the population's own sample shares.
ProbePopulation make_probe_population(DgpId id, Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                      const ProbeDirection& direction = {}, const DgpOptions& options = {},
                                      int target_level = 2);

struct McSummary {
    std::vector<int> replicates;  // replication index of each retained estimate
    std::vector<double> estimates;
    std::vector<double> ses;
    double true_theta = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double sd = 0.0;  // R - 1 divisor; 0 when R = 1
    double rmse = 0.0;
    double coverage_95 = 0.0;
    double mean_se = 0.0;
    int n_failed = 0;
    bool degenerate = false;  // fewer than two successful replications
};

McSummary summarize_estimates(const std::vector<double>& estimates, const std::vector<double>& ses,
                              double true_theta);

enum class EstimatorMode { Orthogonal, Conventional, Both };
std::string_view to_string(EstimatorMode mode);

struct McConfig {
    DgpId dgp = DgpId::RO_ML;
    Eigen::Index n = 200;
    Eigen::Index p = 100;
    int replications = 100;
    std::uint64_t seed = 0;
    EstimatorSpec estimator;  // design and target level are taken from the DGP
    EstimatorMode mode = EstimatorMode::Orthogonal;
    DgpOptions dgp_options;
    int threads = 1;
};

struct McRun {
    std::optional<McSummary> orthogonal;
    std::optional<McSummary> conventional;
};

/// Replication i draws its dataset and runs its estimators with seed + i, so
/// both estimators see identical data. Replications whose estimation fails are
/// counted and excluded. Throws EstimationError when every replication fails.
McRun run_monte_carlo(const McConfig& config);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> edges;  // bins + 1 values
    std::vector<int> counts;
};

/// Equal-width bins over [min, max]; the maximum falls in the last bin.
Histogram make_histogram(const std::vector<double>& values, int bins = 40);

/// Columns: replicate, estimate, se, covered.
void write_estimates_csv(std::ostream& out, const McSummary& summary);

}  // namespace orthodid
