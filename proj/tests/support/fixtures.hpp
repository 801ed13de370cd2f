#pragma once

// Noiseless datasets whose folds are balanced so that every fold's treated share
// equals the treated share of its auxiliary sample. With the true nuisances
// injected, the orthogonal estimators recover the effect to rounding error.

#include "orthodid/crossfit.hpp"

#include <random>

namespace fixture {

using namespace orthodid;

inline constexpr int kFolds = 5;
inline constexpr Eigen::Index kPerFold = 20;
inline constexpr Eigen::Index kRows = kFolds * kPerFold;

/// Observation i sits in fold i % 5 at within-fold position i / 5.
inline FoldPlan balanced_plan() {
    FoldPlan plan;
    plan.k = kFolds;
    plan.assignment.resize(kRows);
    for (Eigen::Index i = 0; i < kRows; ++i) plan.assignment(i) = static_cast<int>(i % kFolds);
    return plan;
}

inline Eigen::Index position(Eigen::Index i) { return i / kFolds; }

inline MatrixXd covariates(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    MatrixXd x(kRows, 3);
    for (Eigen::Index i = 0; i < kRows; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = n01(rng);
    }
    return x;
}

inline double true_g(RowConstRef x) { return logistic(0.8 * x(0) - 0.5 * x(1)); }
inline double true_ell(RowConstRef x) { return 1.0 + x(0) * x(0) - 0.7 * x(2); }
inline double true_g_control(RowConstRef x) { return 0.35 + 0.2 * std::tanh(x(1)); }

/// Delta Y = theta D + ell(X): eight treated per fold.
inline RepeatedOutcomesData repeated_outcomes(double theta, std::uint64_t seed, bool with_level = true) {
    RepeatedOutcomesData data;
    data.x = CovariateMatrix(covariates(seed));
    data.d.resize(kRows);
    data.y_pre.resize(kRows);
    data.y_post.resize(kRows);
    for (Eigen::Index i = 0; i < kRows; ++i) {
        data.d(i) = position(i) < 8 ? 1 : 0;
        const double level = with_level ? true_ell(data.x.values.row(i)) : 0.0;
        data.y_pre(i) = 0.5 * data.x.values(i, 1);
        data.y_post(i) = data.y_pre(i) + level + theta * data.d(i);
    }
    return data;
}

/// Y = theta D T with half of every fold observed after treatment and four
/// treated post-period units per fold; the control regression target is zero.
inline RepeatedCrossSectionData cross_sections(double theta, std::uint64_t seed) {
    RepeatedCrossSectionData data;
    data.x = CovariateMatrix(covariates(seed));
    data.d.resize(kRows);
    data.t.resize(kRows);
    data.y.resize(kRows);
    for (Eigen::Index i = 0; i < kRows; ++i) {
        data.d(i) = position(i) < 8 ? 1 : 0;
        data.t(i) = position(i) % 2 == 0 ? 1 : 0;
        data.y(i) = theta * data.d(i) * data.t(i);
    }
    return data;
}

/// Levels 2 / 1 / 0 for six / six / eight units per fold; Delta Y = ell(X) + effect(W).
inline MultilevelData multilevel(double theta_target, std::uint64_t seed) {
    MultilevelData data;
    data.x = CovariateMatrix(covariates(seed));
    data.levels = 2;
    data.w.resize(kRows);
    data.y_pre.resize(kRows);
    data.y_post.resize(kRows);
    for (Eigen::Index i = 0; i < kRows; ++i) {
        const Eigen::Index pos = position(i);
        data.w(i) = pos < 6 ? 2 : (pos < 12 ? 1 : 0);
        const double effect = data.w(i) == 2 ? theta_target : (data.w(i) == 1 ? 3.0 : 0.0);
        data.y_pre(i) = -0.25 * data.x.values(i, 2);
        data.y_post(i) = data.y_pre(i) + true_ell(data.x.values.row(i)) + effect;
    }
    return data;
}

inline InjectedNuisances binary_truth(bool with_level = true) {
    InjectedNuisances truth;
    truth.propensity = true_g;
    truth.outcome = with_level ? std::function<double(RowConstRef)>(true_ell)
                               : std::function<double(RowConstRef)>([](RowConstRef) { return 0.0; });
    return truth;
}

inline InjectedNuisances multilevel_truth() {
    InjectedNuisances truth;
    truth.propensity = true_g;
    truth.control_propensity = true_g_control;
    truth.outcome = true_ell;
    return truth;
}

}  // namespace fixture
