#include "orthodid/learners.hpp"

#include <cmath>

namespace orthodid {

double predict_kernel(const KernelFit& fit, RowConstRef x0);
double predict_forest(const ForestFit& fit, RowConstRef x0);

std::string_view to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::Lasso: return "lasso";
        case LearnerKind::LogitLasso: return "logit_lasso";
        case LearnerKind::Kernel: return "kernel";
        case LearnerKind::Forest: return "forest";
    }
    return "unknown";
}

LearnerKind parse_learner_kind(std::string_view text) {
    if (text == "lasso") return LearnerKind::Lasso;
    if (text == "logit_lasso") return LearnerKind::LogitLasso;
    if (text == "kernel") return LearnerKind::Kernel;
    if (text == "forest") return LearnerKind::Forest;
    throw ConfigError("unknown learner '" + std::string(text) + "'");
}

std::string_view to_string(Basis basis) {
    return basis == Basis::Raw ? "raw" : "raw_squares";
}

Basis parse_basis(std::string_view text) {
    if (text == "raw") return Basis::Raw;
    if (text == "raw_squares") return Basis::RawSquares;
    throw ConfigError("unknown basis '" + std::string(text) + "'");
}

MatrixXd expand_basis(const MatrixXd& x, Basis basis) {
    if (basis == Basis::Raw) return x;
    MatrixXd q(x.rows(), 2 * x.cols());
    q << x, x.array().square().matrix();
    return q;
}

void LearnerSpec::validate() const {
    if (!(penalty_c > 1.0)) throw ConfigError("learner: penalty constant c must exceed 1");
    if (penalty_gamma && !(*penalty_gamma > 0.0 && *penalty_gamma < 1.0)) {
        throw ConfigError("learner: penalty gamma must lie in (0, 1)");
    }
    if (refinements < 1) throw ConfigError("learner: refinement rounds B must be at least 1");
    if (cv_folds < 2) throw ConfigError("learner: cv_folds must be at least 2");
    if (n_lambda < 1 && lambda_grid.empty()) throw ConfigError("learner: n_lambda must be at least 1");
    if (cv_patience < 0) throw ConfigError("learner: cv_patience must be non-negative");
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw ConfigError("learner: lambda_min_ratio must lie in (0, 1)");
    }
    for (double v : lambda_grid) {
        if (!(v > 0.0)) throw ConfigError("learner: lambda grid values must be positive");
    }
    if (n_bandwidths < 1 && bandwidth_grid.empty()) throw ConfigError("learner: n_bandwidths must be at least 1");
    if (!(bandwidth_lo > 0.0 && bandwidth_hi >= bandwidth_lo)) {
        throw ConfigError("learner: bandwidth range must satisfy 0 < lo <= hi");
    }
    for (double v : bandwidth_grid) {
        if (!(v > 0.0)) throw ConfigError("learner: bandwidths must be positive");
    }
    if (n_trees < 1) throw ConfigError("learner: n_trees must be at least 1");
    if (mtry < 0) throw ConfigError("learner: mtry must be non-negative (0 = automatic)");
    if (min_leaf < 1) throw ConfigError("learner: min_leaf must be at least 1");
}

namespace {

RowConstRef::PlainObject basis_row(RowConstRef x0, Basis basis) {
    if (basis == Basis::Raw) return x0;
    Eigen::RowVectorXd q(2 * x0.size());
    q << x0, x0.array().square().matrix();
    return q;
}

struct PointPredict {
    RowConstRef x0;
    double operator()(const LinearFit& f) const {
        const auto q = basis_row(x0, f.basis);
        if (q.size() != f.coefficients.size()) throw DataError("predict: dimension mismatch");
        return f.intercept + q.dot(f.coefficients);
    }
    double operator()(const LogisticFit& f) const {
        const auto q = basis_row(x0, f.basis);
        if (q.size() != f.coefficients.size()) throw DataError("predict: dimension mismatch");
        return logistic(f.intercept + q.dot(f.coefficients));
    }
    double operator()(const KernelFit& f) const { return predict_kernel(f, x0); }
    double operator()(const ForestFit& f) const {
        if (x0.size() != f.n_features) throw DataError("predict: dimension mismatch");
        return predict_forest(f, x0);
    }
};

}  // namespace

double predict_at(const Predictor& fit, RowConstRef x0) {
    if (!x0.allFinite()) throw DataError("predict: query point must be finite");
    return std::visit(PointPredict{x0}, fit);
}

VectorXd predict(const Predictor& fit, const MatrixXd& x) {
    if (const auto* lin = std::get_if<LinearFit>(&fit)) {
        const MatrixXd q = expand_basis(x, lin->basis);
        if (q.cols() != lin->coefficients.size()) throw DataError("predict: dimension mismatch");
        return (q * lin->coefficients).array() + lin->intercept;
    }
    if (const auto* logit = std::get_if<LogisticFit>(&fit)) {
        const MatrixXd q = expand_basis(x, logit->basis);
        if (q.cols() != logit->coefficients.size()) throw DataError("predict: dimension mismatch");
        VectorXd eta = (q * logit->coefficients).array() + logit->intercept;
        return eta.unaryExpr([](double u) { return logistic(u); });
    }
    VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_at(fit, x.row(i));
    return out;
}

Eigen::Index input_dimension(const Predictor& fit) {
    struct Visitor {
        Eigen::Index operator()(const LinearFit& f) const {
            return f.basis == Basis::Raw ? f.coefficients.size() : f.coefficients.size() / 2;
        }
        Eigen::Index operator()(const LogisticFit& f) const {
            return f.basis == Basis::Raw ? f.coefficients.size() : f.coefficients.size() / 2;
        }
        Eigen::Index operator()(const KernelFit& f) const { return f.train_x.cols(); }
        Eigen::Index operator()(const ForestFit& f) const { return f.n_features; }
    };
    return std::visit(Visitor{}, fit);
}

bool converged(const Predictor& fit) {
    if (const auto* lin = std::get_if<LinearFit>(&fit)) return lin->converged;
    if (const auto* logit = std::get_if<LogisticFit>(&fit)) return logit->converged;
    return true;
}

// ---------------------------------------------------------------------------

namespace {

int resolve_mtry(const LearnerSpec& spec, Eigen::Index p) {
    if (spec.mtry > 0) return static_cast<int>(std::min<Eigen::Index>(spec.mtry, p));
    return static_cast<int>(std::max<Eigen::Index>(1, (p + 2) / 3));
}

std::vector<double> bandwidths_for(const LearnerSpec& spec, const MatrixXd& x) {
    if (!spec.bandwidth_grid.empty()) return spec.bandwidth_grid;
    return default_bandwidth_grid(x, spec.n_bandwidths, spec.bandwidth_lo, spec.bandwidth_hi);
}

}  // namespace

Predictor fit_outcome(const LearnerSpec& spec, const MatrixXd& x, const VectorXd& y) {
    switch (spec.kind) {
        case LearnerKind::Lasso: return fit_lasso_auto(x, y, spec);
        case LearnerKind::Kernel: return fit_kernel_regression(x, y, bandwidths_for(spec, x));
        case LearnerKind::Forest:
            return fit_random_forest(x, y, spec.n_trees, resolve_mtry(spec, x.cols()), spec.min_leaf, spec.seed,
                                     spec.bootstrap);
        case LearnerKind::LogitLasso: break;
    }
    throw ConfigError("logit_lasso cannot be used as an outcome learner");
}

Predictor fit_propensity(const LearnerSpec& spec, const MatrixXd& x, const VectorXi& d) {
    switch (spec.kind) {
        case LearnerKind::LogitLasso: {
            LogisticFit fit = fit_logit_lasso(expand_basis(x, spec.basis), d, spec.lambda_grid, spec.cv_folds,
                                              spec.seed, {}, spec.n_lambda, spec.lambda_min_ratio, spec.cv_patience);
            fit.basis = spec.basis;
            return fit;
        }
        case LearnerKind::Kernel:
            return fit_kernel_regression(x, d.cast<double>(), bandwidths_for(spec, x));
        case LearnerKind::Forest:
            return fit_random_forest(x, d.cast<double>(), spec.n_trees, resolve_mtry(spec, x.cols()),
                                     spec.min_leaf, spec.seed, spec.bootstrap);
        case LearnerKind::Lasso: break;
    }
    throw ConfigError("lasso cannot be used as a propensity learner (use logit_lasso)");
}

VectorXd MulticlassFit::predict_proba_at(RowConstRef x0) const {
    VectorXd probs(classes());
    for (int c = 0; c < classes(); ++c) probs(c) = std::max(0.0, predict_at(per_class[static_cast<std::size_t>(c)], x0));
    const double total = probs.sum();
    if (!(total > 0.0)) return VectorXd::Constant(classes(), 1.0 / classes());
    return probs / total;
}

MatrixXd MulticlassFit::predict_proba(const MatrixXd& x) const {
    MatrixXd raw(x.rows(), classes());
    for (int c = 0; c < classes(); ++c) raw.col(c) = predict(per_class[static_cast<std::size_t>(c)], x).cwiseMax(0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double total = raw.row(i).sum();
        if (total > 0.0) {
            raw.row(i) /= total;
        } else {
            raw.row(i).setConstant(1.0 / classes());
        }
    }
    return raw;
}

MulticlassFit fit_multiclass_propensity(const MatrixXd& x, const VectorXi& w, const LearnerSpec& spec) {
    if (x.rows() != w.size()) throw DataError("multiclass: level vector length mismatch");
    if (w.size() == 0) throw DataError("multiclass: empty sample");
    if (w.minCoeff() < 0) throw DataError("multiclass: levels must be non-negative");
    const int classes = w.maxCoeff() + 1;
    if (classes < 2) throw DataError("multiclass: at least two classes are required");
    MulticlassFit fit;
    for (int c = 0; c < classes; ++c) {
        const VectorXi indicator = (w.array() == c).cast<int>();
        if (indicator.sum() == 0) throw DataError("multiclass: class " + std::to_string(c) + " is absent");
        LearnerSpec per = spec;
        per.seed = spec.seed + static_cast<std::uint64_t>(c);
        fit.per_class.push_back(fit_propensity(per, x, indicator));
    }
    return fit;
}

}  // namespace orthodid
