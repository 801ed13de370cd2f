#pragma once

// Cross-fitted orthogonal DID estimators with plug-in variance, and the
// full-sample conventional (inverse-propensity) estimators for comparison.

#include "orthodid/data.hpp"
#include "orthodid/learners.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace orthodid {

struct EstimatorSpec {
    Design design = Design::RepeatedOutcomes;
    int k_folds = 5;
    LearnerSpec propensity_learner = learner_spec(LearnerKind::LogitLasso);
    LearnerSpec outcome_learner = learner_spec(LearnerKind::Lasso);
    double clip = 0.01;  // propensities are held inside [clip, 1 - clip]
    std::uint64_t seed = 0;
    int target_level = 1;  // multilevel only
    int max_fold_redraws = 100;

    void validate() const;
};

/// Known nuisance functions that replace the learners (oracle studies and tests).
/// For multilevel data `propensity` is P(W = target | x) and `control_propensity`
/// is P(W = 0 | x).
struct InjectedNuisances {
    std::function<double(RowConstRef)> propensity;
    std::function<double(RowConstRef)> outcome;
    std::function<double(RowConstRef)> control_propensity;
};

struct CrossfitOptions {
    /// Use this partition instead of drawing one from the seed.
    std::optional<FoldPlan> folds;
    const InjectedNuisances* inject = nullptr;
};

struct AttDiagnostics {
    std::string estimator = "orthogonal";  // or "conventional"
    std::size_t clipped = 0;               // raw propensity predictions moved by clipping
    std::size_t kernel_fallbacks = 0;
    int fold_redraws = 0;
    std::vector<Eigen::Index> fold_sizes;
    std::vector<bool> propensity_converged;
    std::vector<bool> outcome_converged;
    bool naive_variance = false;
};

struct AttResult {
    double theta_hat = 0.0;
    double sigma_hat = 0.0;  // asymptotic variance estimate
    double se = 0.0;         // sqrt(sigma_hat / N)
    std::pair<double, double> ci_95{0.0, 0.0};
    int k_folds = 0;
    Eigen::Index n = 0;
    std::uint64_t fold_seed = 0;
    std::vector<double> per_fold_theta;
    std::vector<double> p_hat_per_fold;
    std::vector<double> lambda_hat_per_fold;   // cross sections only
    std::vector<double> g_lambda_per_fold;     // cross sections only
    AttDiagnostics diagnostics;
};

AttResult estimate_ro(const RepeatedOutcomesData& data, const EstimatorSpec& spec,
                      const CrossfitOptions& options = {});
AttResult estimate_rcs(const RepeatedCrossSectionData& data, const EstimatorSpec& spec,
                       const CrossfitOptions& options = {});
AttResult estimate_multi(const MultilevelData& data, const EstimatorSpec& spec,
                         const CrossfitOptions& options = {});
/// Dispatches on the dataset variant; `spec.design` must match.
AttResult estimate(const Dataset& data, const EstimatorSpec& spec, const CrossfitOptions& options = {});

/// Full-sample plug-in of the conventional score (no adjustment, no cross-fitting).
/// The reported variance is the naive sample variance of the score over N.
AttResult estimate_conventional(const Dataset& data, const EstimatorSpec& spec,
                                const InjectedNuisances* inject = nullptr);

/// Clips into [lo, 1 - lo] and counts how many values moved.
std::size_t clip_propensities(VectorXd& g, double lo);

}  // namespace orthodid
