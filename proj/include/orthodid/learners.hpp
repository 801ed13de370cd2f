#pragma once

// First-stage learners for the propensity score and the conditional-mean
// nuisances: weighted Lasso, L1-penalized logistic regression, Gaussian
// Nadaraya-Watson regression and a regression forest. Every fit is an
// immutable value; prediction is safe from many threads.

#include "orthodid/core.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace orthodid {

enum class LearnerKind { Lasso, LogitLasso, Kernel, Forest };
std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view text);

/// Dictionary q(x) fed to the linear learners (an intercept is always added separately).
enum class Basis { Raw, RawSquares };
std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view text);
MatrixXd expand_basis(const MatrixXd& x, Basis basis);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::Lasso;
    Basis basis = Basis::Raw;

    // Lasso penalty: lambda = 2 c sqrt(M) Phi^-1(1 - gamma / 2p), refined `refinements` times.
    double penalty_c = 1.1;
    std::optional<double> penalty_gamma;  // default 0.1 / log(max(p, M))
    int refinements = 2;

    // Logit Lasso: lambda chosen by K-fold CV deviance over a log grid.
    int cv_folds = 10;
    int n_lambda = 50;
    double lambda_min_ratio = 1e-4;
    int cv_patience = 10;  // stop the CV path after this many non-improving points; 0 walks it all
    std::vector<double> lambda_grid;  // overrides the automatic grid when non-empty

    // Kernel regression: log grid over [lo, hi] * sd(x) * M^(-1/5), leave-one-out CV.
    int n_bandwidths = 20;
    double bandwidth_lo = 0.1;
    double bandwidth_hi = 3.0;
    std::vector<double> bandwidth_grid;  // overrides the automatic grid when non-empty

    // Forest.
    int n_trees = 500;
    int mtry = 0;  // 0: ceil(p / 3)
    int min_leaf = 5;
    bool bootstrap = true;

    std::uint64_t seed = 0;

    /// Throws ConfigError when a hyperparameter is outside its documented range.
    void validate() const;
};

/// Default settings for the given learner kind.
inline LearnerSpec learner_spec(LearnerKind kind) {
    LearnerSpec spec;
    spec.kind = kind;
    return spec;
}

// ---------------------------------------------------------------------------
// Fitted predictors

struct LinearFit {
    VectorXd coefficients;
    double intercept = 0.0;
    Basis basis = Basis::Raw;
    double lambda = 0.0;
    VectorXd loadings;
    int iterations = 0;
    bool converged = true;
};

struct LogisticFit {
    VectorXd coefficients;
    double intercept = 0.0;
    Basis basis = Basis::Raw;
    double lambda = 0.0;
    std::vector<double> cv_grid;
    std::vector<double> cv_deviance;
    int iterations = 0;
    bool converged = true;
    std::vector<double> objective_trace;  // filled only when requested
};

struct KernelFit {
    MatrixXd train_x;
    VectorXd train_y;
    double bandwidth = 1.0;
    double train_mean = 0.0;
    std::vector<double> cv_grid;
    std::vector<double> cv_scores;
    /// Number of predictions where every kernel weight underflowed to zero.
    std::shared_ptr<std::atomic<std::size_t>> fallback_count =
        std::make_shared<std::atomic<std::size_t>>(0);
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(RowConstRef x) const;
    std::size_t leaf_count() const;
};

struct ForestFit {
    std::vector<RegressionTree> trees;
    int n_trees = 0;
    int mtry = 0;
    int min_leaf = 0;
    int n_features = 0;
    std::uint64_t seed = 0;
};

using Predictor = std::variant<LinearFit, LogisticFit, KernelFit, ForestFit>;

/// Pointwise prediction. LogisticFit returns a probability in (0, 1).
double predict_at(const Predictor& fit, RowConstRef x0);
/// Row-wise prediction over a covariate matrix.
VectorXd predict(const Predictor& fit, const MatrixXd& x);
/// Expected covariate dimension of the fit (before basis expansion).
Eigen::Index input_dimension(const Predictor& fit);
bool converged(const Predictor& fit);

// ---------------------------------------------------------------------------
// Weighted Lasso

struct PenaltyChoice {
    double lambda = 0.0;
    VectorXd loadings;
    /// loadings after the initial step and after each refinement round
    std::vector<VectorXd> history;
};

PenaltyChoice compute_penalty_loadings(const MatrixXd& q, const VectorXd& y, double c, double gamma,
                                       int refinements);

struct LassoOptions {
    double tolerance = 1e-8;
    int max_sweeps = 10000;
};

/// Minimizes (1/M) sum (y - a - q'b)^2 + (lambda/M) sum_j loading_j |b_j| by cyclic
/// coordinate descent with an unpenalized intercept `a`.
LinearFit fit_lasso(const MatrixXd& q, const VectorXd& y, double lambda, const VectorXd& loadings,
                    const LassoOptions& options = {});

/// Penalty level and loadings from the data, then the Lasso at those values.
LinearFit fit_lasso_auto(const MatrixXd& x, const VectorXd& y, const LearnerSpec& spec);

// ---------------------------------------------------------------------------
// Logit Lasso

struct LogitOptions {
    double tolerance = 1e-8;        // KKT residual of the returned fit
    double path_tolerance = 1e-6;   // KKT residual for CV and warm-start path solves
    int max_iterations = 20000;
    bool record_trace = false;
};

/// Minimizes (1/M) sum [-d (a + q'b) + log(1 + exp(a + q'b))] + lambda ||b||_1
/// by monotone accelerated proximal gradient with backtracking.
LogisticFit fit_logit_lasso_fixed(const MatrixXd& q, const VectorXi& d, double lambda,
                                  const LogitOptions& options = {});

/// Smallest lambda at which every penalized coefficient is zero.
double logit_lambda_max(const MatrixXd& q, const VectorXi& d);

/// Selects lambda from `lambda_grid` (automatic when empty) by cv_folds-fold deviance,
/// then refits on the full sample. With patience > 0 the CV walk stops once the
/// pooled deviance has not improved for that many consecutive grid points; grid
/// points never reached carry NaN in cv_deviance.
LogisticFit fit_logit_lasso(const MatrixXd& q, const VectorXi& d, std::vector<double> lambda_grid,
                            int cv_folds, std::uint64_t seed, const LogitOptions& options = {},
                            int n_lambda = 50, double lambda_min_ratio = 1e-4,
                            int patience = 10);

// ---------------------------------------------------------------------------
// Kernel regression

std::vector<double> default_bandwidth_grid(const MatrixXd& x, int count, double lo, double hi);

/// Nadaraya-Watson with a product Gaussian kernel; bandwidth by leave-one-out CV.
KernelFit fit_kernel_regression(const MatrixXd& x, const VectorXd& y, std::vector<double> bandwidth_grid);
KernelFit make_kernel_fit(const MatrixXd& x, const VectorXd& y, double bandwidth);
double kernel_loo_score(const MatrixXd& x, const VectorXd& y, double bandwidth);

// ---------------------------------------------------------------------------
// Forest

ForestFit fit_random_forest(const MatrixXd& x, const VectorXd& y, int n_trees, int mtry, int min_leaf,
                            std::uint64_t seed, bool bootstrap = true);

// ---------------------------------------------------------------------------
// Multiclass propensity

struct MulticlassFit {
    std::vector<Predictor> per_class;  // index = treatment level

    int classes() const { return static_cast<int>(per_class.size()); }
    /// Class probabilities normalised to sum to one.
    VectorXd predict_proba_at(RowConstRef x0) const;
    MatrixXd predict_proba(const MatrixXd& x) const;
};

/// One-vs-rest fits per level 0..J, normalised across classes at the query point.
MulticlassFit fit_multiclass_propensity(const MatrixXd& x, const VectorXi& w, const LearnerSpec& spec);

// ---------------------------------------------------------------------------
// Dispatch used by the cross-fitting engine

/// Conditional-mean learner (lasso, kernel, forest).
Predictor fit_outcome(const LearnerSpec& spec, const MatrixXd& x, const VectorXd& y);
/// Binary propensity learner (logit_lasso, kernel, forest).
Predictor fit_propensity(const LearnerSpec& spec, const MatrixXd& x, const VectorXi& d);

}  // namespace orthodid
