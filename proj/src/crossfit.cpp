#include "orthodid/crossfit.hpp"

#include "orthodid/scores.hpp"

#include <cmath>

namespace orthodid {

void EstimatorSpec::validate() const {
    if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
    if (!(clip > 0.0 && clip < 0.5)) throw ConfigError("clip must lie in (0, 0.5)");
    if (max_fold_redraws < 0) throw ConfigError("max_fold_redraws must be non-negative");
    if (design == Design::Multilevel && target_level < 1) throw ConfigError("target_level must be at least 1");
    propensity_learner.validate();
    outcome_learner.validate();
    if (propensity_learner.kind == LearnerKind::Lasso) {
        throw ConfigError("lasso cannot be used as a propensity learner (use logit_lasso)");
    }
    if (outcome_learner.kind == LearnerKind::LogitLasso) {
        throw ConfigError("logit_lasso cannot be used as an outcome learner");
    }
}

std::size_t clip_propensities(VectorXd& g, double lo) {
    std::size_t moved = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double c = std::clamp(g(i), lo, 1.0 - lo);
        if (c != g(i)) {
            ++moved;
            g(i) = c;
        }
    }
    return moved;
}

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

MatrixXd rows_of(const MatrixXd& m, const IndexVector& rows) {
    MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

template <class V>
V rows_of(const V& v, const IndexVector& rows) {
    V out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

VectorXd evaluate(const std::function<double(RowConstRef)>& fn, const MatrixXd& x) {
    VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = fn(x.row(i));
    return out;
}

std::size_t kernel_fallbacks(const Predictor& fit) {
    if (const auto* k = std::get_if<KernelFit>(&fit)) return k->fallback_count->load();
    return 0;
}

// Per-fold learner seeds keep folds independent but reproducible.
LearnerSpec seeded(const LearnerSpec& base, std::uint64_t estimator_seed, int fold, int role) {
    LearnerSpec spec = base;
    spec.seed = derive_seed(base.seed ^ estimator_seed, static_cast<std::uint64_t>(fold * 8 + role));
    return spec;
}

template <class Check>
FoldPlan draw_folds(Eigen::Index n, const EstimatorSpec& spec, const CrossfitOptions& options, Check valid,
                    int& redraws) {
    redraws = 0;
    if (options.folds) {
        const FoldPlan& plan = *options.folds;
        if (plan.size() != n) throw ConfigError("supplied fold plan does not match the sample size");
        if (plan.k < 2) throw ConfigError("supplied fold plan needs at least two folds");
        if (!valid(plan)) throw EstimationError("supplied fold plan has a degenerate auxiliary sample");
        return plan;
    }
    if (2 * static_cast<Eigen::Index>(spec.k_folds) > n) {
        throw ConfigError("sample too small: need N >= 2K observations");
    }
    for (int attempt = 0; attempt <= spec.max_fold_redraws; ++attempt) {
        FoldPlan plan = make_folds(n, spec.k_folds, spec.seed + static_cast<std::uint64_t>(attempt));
        if (valid(plan)) {
            redraws = attempt;
            return plan;
        }
    }
    throw EstimationError("every fold draw produced a degenerate auxiliary sample");
}

template <class Fn>
auto with_fold_context(int fold, const char* what, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw EstimationError(std::string(what) + " learner failed on fold " + std::to_string(fold) + ": " +
                              e.what());
    }
}

// Shared reduction: theta is the size-weighted fold mean; the variance adds the
// finite-dimensional nuisance corrections supplied by `influence`.
void finish(AttResult& result, const FoldPlan& plan, const std::vector<IndexVector>& folds,
            const VectorXd& base_score, const std::function<double(int, Eigen::Index, double)>& correction) {
    const auto n = static_cast<double>(plan.size());
    double theta = 0.0;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        theta += result.per_fold_theta[k] * static_cast<double>(folds[k].size());
    }
    theta /= n;
    double sigma = 0.0;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        for (auto i : folds[k]) {
            const double psi = base_score(i) - theta + correction(static_cast<int>(k), i, theta);
            sigma += psi * psi;
        }
    }
    sigma /= n;
    result.theta_hat = theta;
    result.sigma_hat = sigma;
    result.se = std::sqrt(sigma / n);
    result.ci_95 = {theta - 1.96 * result.se, theta + 1.96 * result.se};
    result.k_folds = plan.k;
    result.n = plan.size();
    result.fold_seed = plan.seed;
    result.diagnostics.fold_sizes = plan.fold_sizes();
}

bool both_values(const VectorXi& v, const IndexVector& rows) {
    bool zero = false;
    bool one = false;
    for (auto i : rows) {
        zero |= v(i) == 0;
        one |= v(i) == 1;
    }
    return zero && one;
}

Eigen::Index count_equal(const VectorXi& v, const IndexVector& rows, int value) {
    Eigen::Index c = 0;
    for (auto i : rows) c += v(i) == value ? 1 : 0;
    return c;
}

IndexVector select(const VectorXi& v, const IndexVector& rows, int value) {
    IndexVector out;
    for (auto i : rows) {
        if (v(i) == value) out.push_back(i);
    }
    return out;
}

}  // namespace

AttResult estimate_ro(const RepeatedOutcomesData& data, const EstimatorSpec& spec, const CrossfitOptions& options) {
    spec.validate();
    data.validate();
    const Eigen::Index n = data.size();
    const VectorXd dy = data.delta_y();
    const auto& x = data.x.values;

    int redraws = 0;
    const FoldPlan plan = draw_folds(
        n, spec, options,
        [&](const FoldPlan& p) {
            for (int k = 0; k < p.k; ++k) {
                const IndexVector aux = p.complement(k);
                if (!both_values(data.d, aux) || count_equal(data.d, aux, 0) < 2) return false;
            }
            return true;
        },
        redraws);

    AttResult result;
    result.diagnostics.fold_redraws = redraws;
    std::vector<IndexVector> folds;
    VectorXd base(n);
    for (int k = 0; k < plan.k; ++k) {
        const IndexVector fold = plan.fold(k);
        const IndexVector aux = plan.complement(k);
        const IndexVector aux_controls = select(data.d, aux, 0);
        const double p_hat = mean_over(data.d.cast<double>(), aux);
        const MatrixXd x_fold = rows_of(x, fold);

        VectorXd g;
        VectorXd ell;
        if (options.inject) {
            g = evaluate(options.inject->propensity, x_fold);
            ell = evaluate(options.inject->outcome, x_fold);
            result.diagnostics.propensity_converged.push_back(true);
            result.diagnostics.outcome_converged.push_back(true);
        } else {
            const Predictor g_fit = with_fold_context(k, "propensity", [&] {
                return fit_propensity(seeded(spec.propensity_learner, spec.seed, k, 0), rows_of(x, aux),
                                      rows_of(data.d, aux));
            });
            const Predictor l_fit = with_fold_context(k, "outcome", [&] {
                return fit_outcome(seeded(spec.outcome_learner, spec.seed, k, 1), rows_of(x, aux_controls),
                                   rows_of(dy, aux_controls));
            });
            g = predict(g_fit, x_fold);
            ell = predict(l_fit, x_fold);
            result.diagnostics.propensity_converged.push_back(converged(g_fit));
            result.diagnostics.outcome_converged.push_back(converged(l_fit));
            result.diagnostics.kernel_fallbacks += kernel_fallbacks(g_fit) + kernel_fallbacks(l_fit);
        }
        result.diagnostics.clipped += clip_propensities(g, spec.clip);

        const ScoreParams<double> par{0.0, p_hat, 0.0};
        double sum = 0.0;
        for (std::size_t j = 0; j < fold.size(); ++j) {
            const auto i = fold[j];
            const auto jj = static_cast<Eigen::Index>(j);
            base(i) = score_ro_orthogonal(dy(i), data.d(i), par, NuisanceAt<double>{g(jj), ell(jj)});
            sum += base(i);
        }
        result.per_fold_theta.push_back(sum / static_cast<double>(fold.size()));
        result.p_hat_per_fold.push_back(p_hat);
        folds.push_back(fold);
    }
    finish(result, plan, folds, base, [&](int k, Eigen::Index i, double theta) {
        const double p_hat = result.p_hat_per_fold[static_cast<std::size_t>(k)];
        return -theta / p_hat * (data.d(i) - p_hat);
    });
    return result;
}

AttResult estimate_rcs(const RepeatedCrossSectionData& data, const EstimatorSpec& spec,
                       const CrossfitOptions& options) {
    spec.validate();
    data.validate();
    const Eigen::Index n = data.size();
    const auto& x = data.x.values;

    int redraws = 0;
    const FoldPlan plan = draw_folds(
        n, spec, options,
        [&](const FoldPlan& p) {
            for (int k = 0; k < p.k; ++k) {
                const IndexVector aux = p.complement(k);
                if (!both_values(data.d, aux) || !both_values(data.t, aux) || count_equal(data.d, aux, 0) < 2) {
                    return false;
                }
            }
            return true;
        },
        redraws);

    AttResult result;
    result.diagnostics.fold_redraws = redraws;
    std::vector<IndexVector> folds;
    VectorXd base(n);
    for (int k = 0; k < plan.k; ++k) {
        const IndexVector fold = plan.fold(k);
        const IndexVector aux = plan.complement(k);
        const IndexVector aux_controls = select(data.d, aux, 0);
        const double p_hat = mean_over(data.d.cast<double>(), aux);
        const double lambda_hat = mean_over(data.t.cast<double>(), aux);
        const MatrixXd x_fold = rows_of(x, fold);

        VectorXd g;
        VectorXd ell;
        if (options.inject) {
            g = evaluate(options.inject->propensity, x_fold);
            ell = evaluate(options.inject->outcome, x_fold);
            result.diagnostics.propensity_converged.push_back(true);
            result.diagnostics.outcome_converged.push_back(true);
        } else {
            VectorXd response(static_cast<Eigen::Index>(aux_controls.size()));
            for (std::size_t j = 0; j < aux_controls.size(); ++j) {
                const auto i = aux_controls[j];
                response(static_cast<Eigen::Index>(j)) = (data.t(i) - lambda_hat) * data.y(i);
            }
            const Predictor g_fit = with_fold_context(k, "propensity", [&] {
                return fit_propensity(seeded(spec.propensity_learner, spec.seed, k, 0), rows_of(x, aux),
                                      rows_of(data.d, aux));
            });
            const Predictor l_fit = with_fold_context(k, "outcome", [&] {
                return fit_outcome(seeded(spec.outcome_learner, spec.seed, k, 1), rows_of(x, aux_controls), response);
            });
            g = predict(g_fit, x_fold);
            ell = predict(l_fit, x_fold);
            result.diagnostics.propensity_converged.push_back(converged(g_fit));
            result.diagnostics.outcome_converged.push_back(converged(l_fit));
            result.diagnostics.kernel_fallbacks += kernel_fallbacks(g_fit) + kernel_fallbacks(l_fit);
        }
        result.diagnostics.clipped += clip_propensities(g, spec.clip);

        const ScoreParams<double> par{0.0, p_hat, lambda_hat};
        double sum = 0.0;
        double dsum = 0.0;
        for (std::size_t j = 0; j < fold.size(); ++j) {
            const auto i = fold[j];
            const NuisanceAt<double> nu{g(static_cast<Eigen::Index>(j)), ell(static_cast<Eigen::Index>(j))};
            base(i) = score_rcs_orthogonal(data.y(i), data.t(i), data.d(i), par, nu);
            sum += base(i);
            dsum += score_rcs_lambda_derivative(data.y(i), data.t(i), data.d(i), par, nu);
        }
        const auto m = static_cast<double>(fold.size());
        result.per_fold_theta.push_back(sum / m);
        result.p_hat_per_fold.push_back(p_hat);
        result.lambda_hat_per_fold.push_back(lambda_hat);
        result.g_lambda_per_fold.push_back(dsum / m);
        folds.push_back(fold);
    }
    finish(result, plan, folds, base, [&](int k, Eigen::Index i, double theta) {
        const auto kk = static_cast<std::size_t>(k);
        const double p_hat = result.p_hat_per_fold[kk];
        const double lambda_hat = result.lambda_hat_per_fold[kk];
        return -theta / p_hat * (data.d(i) - p_hat) + result.g_lambda_per_fold[kk] * (data.t(i) - lambda_hat);
    });
    return result;
}

AttResult estimate_multi(const MultilevelData& data, const EstimatorSpec& spec, const CrossfitOptions& options) {
    spec.validate();
    data.validate();
    const int target = spec.target_level;
    if (target > data.levels) throw ConfigError("target_level exceeds the number of treatment levels");
    const Eigen::Index n = data.size();
    const VectorXd dy = data.delta_y();
    const auto& x = data.x.values;

    int redraws = 0;
    const FoldPlan plan = draw_folds(
        n, spec, options,
        [&](const FoldPlan& p) {
            for (int k = 0; k < p.k; ++k) {
                const IndexVector aux = p.complement(k);
                for (int level = 0; level <= data.levels; ++level) {
                    if (count_equal(data.w, aux, level) == 0) return false;
                }
                if (count_equal(data.w, aux, 0) < 2) return false;
            }
            return true;
        },
        redraws);

    AttResult result;
    result.diagnostics.fold_redraws = redraws;
    std::vector<IndexVector> folds;
    VectorXd base(n);
    for (int k = 0; k < plan.k; ++k) {
        const IndexVector fold = plan.fold(k);
        const IndexVector aux = plan.complement(k);
        const IndexVector aux_controls = select(data.w, aux, 0);
        const double p_hat = static_cast<double>(count_equal(data.w, aux, target)) / static_cast<double>(aux.size());
        const MatrixXd x_fold = rows_of(x, fold);

        VectorXd g_w;
        VectorXd g_z;
        VectorXd ell;
        if (options.inject) {
            g_w = evaluate(options.inject->propensity, x_fold);
            g_z = evaluate(options.inject->control_propensity, x_fold);
            ell = evaluate(options.inject->outcome, x_fold);
            result.diagnostics.propensity_converged.push_back(true);
            result.diagnostics.outcome_converged.push_back(true);
        } else {
            const MulticlassFit g_fit = with_fold_context(k, "propensity", [&] {
                return fit_multiclass_propensity(rows_of(x, aux), rows_of(data.w, aux),
                                                 seeded(spec.propensity_learner, spec.seed, k, 0));
            });
            const Predictor l_fit = with_fold_context(k, "outcome", [&] {
                return fit_outcome(seeded(spec.outcome_learner, spec.seed, k, 1), rows_of(x, aux_controls),
                                   rows_of(dy, aux_controls));
            });
            const MatrixXd probs = g_fit.predict_proba(x_fold);
            g_w = probs.col(target);
            g_z = probs.col(0);
            ell = predict(l_fit, x_fold);
            bool ok = true;
            for (const auto& c : g_fit.per_class) {
                ok = ok && converged(c);
                result.diagnostics.kernel_fallbacks += kernel_fallbacks(c);
            }
            result.diagnostics.propensity_converged.push_back(ok);
            result.diagnostics.outcome_converged.push_back(converged(l_fit));
            result.diagnostics.kernel_fallbacks += kernel_fallbacks(l_fit);
        }
        result.diagnostics.clipped += clip_propensities(g_w, spec.clip);
        result.diagnostics.clipped += clip_propensities(g_z, spec.clip);

        const ScoreParams<double> par{0.0, p_hat, 0.0};
        double sum = 0.0;
        for (std::size_t j = 0; j < fold.size(); ++j) {
            const auto i = fold[j];
            const auto jj = static_cast<Eigen::Index>(j);
            NuisanceAt<double> nu;
            nu.g_w = g_w(jj);
            nu.g_z = g_z(jj);
            nu.ell = ell(jj);
            base(i) = score_multi_orthogonal(dy(i), data.w(i), target, par, nu);
            sum += base(i);
        }
        result.per_fold_theta.push_back(sum / static_cast<double>(fold.size()));
        result.p_hat_per_fold.push_back(p_hat);
        folds.push_back(fold);
    }
    finish(result, plan, folds, base, [&](int k, Eigen::Index i, double theta) {
        const double p_hat = result.p_hat_per_fold[static_cast<std::size_t>(k)];
        return -theta / p_hat * ((data.w(i) == target ? 1.0 : 0.0) - p_hat);
    });
    return result;
}

AttResult estimate(const Dataset& data, const EstimatorSpec& spec, const CrossfitOptions& options) {
    if (design_of(data) != spec.design) throw ConfigError("estimator design does not match the dataset");
    struct Visitor {
        const EstimatorSpec& spec;
        const CrossfitOptions& options;
        AttResult operator()(const RepeatedOutcomesData& d) const { return estimate_ro(d, spec, options); }
        AttResult operator()(const RepeatedCrossSectionData& d) const { return estimate_rcs(d, spec, options); }
        AttResult operator()(const MultilevelData& d) const { return estimate_multi(d, spec, options); }
    };
    return std::visit(Visitor{spec, options}, data);
}

// ---------------------------------------------------------------------------

AttResult estimate_conventional(const Dataset& data, const EstimatorSpec& spec, const InjectedNuisances* inject) {
    spec.validate();
    if (design_of(data) != spec.design) throw ConfigError("estimator design does not match the dataset");
    const CovariateMatrix& cov = covariates_of(data);
    const auto& x = cov.values;
    const Eigen::Index n = size_of(data);

    AttResult result;
    result.diagnostics.estimator = "conventional";
    result.diagnostics.naive_variance = true;
    VectorXd score(n);
    const LearnerSpec prop = seeded(spec.propensity_learner, spec.seed, 0, 2);

    auto fit_binary = [&](const VectorXi& d) -> VectorXd {
        if (inject) {
            result.diagnostics.propensity_converged.push_back(true);
            return evaluate(inject->propensity, x);
        }
        const Predictor fit = with_fold_context(0, "propensity", [&] { return fit_propensity(prop, x, d); });
        result.diagnostics.propensity_converged.push_back(converged(fit));
        VectorXd g = predict(fit, x);
        result.diagnostics.kernel_fallbacks += kernel_fallbacks(fit);
        return g;
    };

    if (const auto* ro = std::get_if<RepeatedOutcomesData>(&data)) {
        ro->validate();
        const double p_hat = ro->d.cast<double>().mean();
        VectorXd g = fit_binary(ro->d);
        result.diagnostics.clipped += clip_propensities(g, spec.clip);
        const VectorXd dy = ro->delta_y();
        const ScoreParams<double> par{0.0, p_hat, 0.0};
        for (Eigen::Index i = 0; i < n; ++i) {
            score(i) = score_ro_conventional(dy(i), ro->d(i), par, NuisanceAt<double>{g(i), 0.0});
        }
        result.p_hat_per_fold.push_back(p_hat);
    } else if (const auto* rcs = std::get_if<RepeatedCrossSectionData>(&data)) {
        rcs->validate();
        const double p_hat = rcs->d.cast<double>().mean();
        const double lambda_hat = rcs->t.cast<double>().mean();
        VectorXd g = fit_binary(rcs->d);
        result.diagnostics.clipped += clip_propensities(g, spec.clip);
        const ScoreParams<double> par{0.0, p_hat, lambda_hat};
        for (Eigen::Index i = 0; i < n; ++i) {
            score(i) = score_rcs_conventional(rcs->y(i), rcs->t(i), rcs->d(i), par, NuisanceAt<double>{g(i), 0.0});
        }
        result.p_hat_per_fold.push_back(p_hat);
        result.lambda_hat_per_fold.push_back(lambda_hat);
    } else {
        const auto& multi = std::get<MultilevelData>(data);
        multi.validate();
        const int target = spec.target_level;
        if (target > multi.levels) throw ConfigError("target_level exceeds the number of treatment levels");
        const double p_hat = (multi.w.array() == target).cast<double>().mean();
        VectorXd g_w;
        VectorXd g_z;
        if (inject) {
            g_w = evaluate(inject->propensity, x);
            g_z = evaluate(inject->control_propensity, x);
            result.diagnostics.propensity_converged.push_back(true);
        } else {
            const MulticlassFit fit = with_fold_context(0, "propensity", [&] {
                return fit_multiclass_propensity(x, multi.w, prop);
            });
            const MatrixXd probs = fit.predict_proba(x);
            g_w = probs.col(target);
            g_z = probs.col(0);
            bool ok = true;
            for (const auto& c : fit.per_class) ok = ok && converged(c);
            result.diagnostics.propensity_converged.push_back(ok);
        }
        result.diagnostics.clipped += clip_propensities(g_w, spec.clip);
        result.diagnostics.clipped += clip_propensities(g_z, spec.clip);
        const VectorXd dy = multi.delta_y();
        const ScoreParams<double> par{0.0, p_hat, 0.0};
        for (Eigen::Index i = 0; i < n; ++i) {
            NuisanceAt<double> nu;
            nu.g_w = g_w(i);
            nu.g_z = g_z(i);
            score(i) = score_multi_conventional(dy(i), multi.w(i), target, par, nu);
        }
        result.p_hat_per_fold.push_back(p_hat);
    }

    const double theta = score.mean();
    const double sigma = (score.array() - theta).square().mean();
    result.theta_hat = theta;
    result.sigma_hat = sigma;
    result.se = std::sqrt(sigma / static_cast<double>(n));
    result.ci_95 = {theta - 1.96 * result.se, theta + 1.96 * result.se};
    result.k_folds = 1;
    result.n = n;
    result.fold_seed = spec.seed;
    result.per_fold_theta.push_back(theta);
    result.diagnostics.fold_sizes.push_back(n);
    return result;
}

}  // namespace orthodid
