#include "orthodid/data.hpp"
#include "orthodid/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orthodid {

namespace {

struct LogitProblem {
    const MatrixXd& q;
    VectorXd d;
    double lambda;
    double inv_m;

    double loss(const VectorXd& eta) const {
        double total = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) total += log1p_exp(eta(i)) - d(i) * eta(i);
        return total * inv_m;
    }

    double smooth(double a, const VectorXd& b, VectorXd& eta) const {
        eta.noalias() = q * b;
        eta.array() += a;
        return loss(eta);
    }

    // Gradient of the smooth part given the linear predictor.
    void gradient(const VectorXd& eta, double& ga, VectorXd& gb) const {
        VectorXd r(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = logistic(eta(i)) - d(i);
        ga = r.sum() * inv_m;
        gb.noalias() = q.transpose() * r;
        gb *= inv_m;
    }

    double penalty(const VectorXd& b) const { return lambda * b.lpNorm<1>(); }

    double kkt_residual(double ga, const VectorXd& gb, const VectorXd& b) const {
        double worst = std::abs(ga);
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            double v;
            if (b(j) > 0.0) {
                v = std::abs(gb(j) + lambda);
            } else if (b(j) < 0.0) {
                v = std::abs(gb(j) - lambda);
            } else {
                v = std::max(0.0, std::abs(gb(j)) - lambda);
            }
            worst = std::max(worst, v);
        }
        return worst;
    }
};

double soft(double z, double t) {
    return z > t ? z - t : (z < -t ? z + t : 0.0);
}

// Largest squared singular value of [1 q], by power iteration.
double spectral_bound(const MatrixXd& q) {
    VectorXd v = VectorXd::Ones(q.cols() + 1);
    v /= v.norm();
    double value = 1.0;
    VectorXd u(q.rows());
    for (int it = 0; it < 50; ++it) {
        u.noalias() = q * v.tail(q.cols());
        u.array() += v(0);
        VectorXd w(q.cols() + 1);
        w(0) = u.sum();
        w.tail(q.cols()).noalias() = q.transpose() * u;
        const double norm = w.norm();
        if (norm == 0.0) return 1.0;
        const double next = norm;
        v = w / norm;
        if (std::abs(next - value) <= 1e-6 * next) {
            value = next;
            break;
        }
        value = next;
    }
    return value;
}

struct Warm {
    double a = 0.0;
    VectorXd b;
    double step_l = 0.0;
};

LogisticFit solve(const MatrixXd& q, const VectorXi& d, double lambda, const LogitOptions& options,
                  Warm& warm) {
    const Eigen::Index m = q.rows();
    const Eigen::Index p = q.cols();
    LogitProblem prob{q, d.cast<double>(), lambda, 1.0 / static_cast<double>(m)};

    if (warm.b.size() != p) {
        warm.b = VectorXd::Zero(p);
        const double mean = prob.d.mean();
        warm.a = std::log(mean / (1.0 - mean));
    }
    if (warm.step_l <= 0.0) warm.step_l = 0.25 * spectral_bound(q) * prob.inv_m;

    // The linear predictor is affine in (a, b), so the extrapolated point's eta is
    // carried along as the same combination instead of being recomputed.
    double xa = warm.a;
    VectorXd xb = warm.b;
    VectorXd eta_x(m);
    double f_x = prob.smooth(xa, xb, eta_x) + prob.penalty(xb);
    double ya = xa;
    VectorXd yb = xb;
    VectorXd eta_y = eta_x;
    double t = 1.0;
    double l = warm.step_l;

    LogisticFit fit;
    fit.lambda = lambda;
    fit.converged = false;
    if (options.record_trace) fit.objective_trace.push_back(f_x);

    double ga = 0.0;
    VectorXd gb(p);
    VectorXd zb(p);
    VectorXd eta_z(m);
    VectorXd prev_b(p);
    VectorXd eta_prev(m);
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        // Convergence is judged at the current iterate every few steps.
        if (iter % 5 == 0) {
            if (iter % 50 == 0 && iter > 0) {
                // Refresh the carried predictors against accumulated rounding.
                f_x = prob.smooth(xa, xb, eta_x) + prob.penalty(xb);
            }
            double gxa;
            prob.gradient(eta_x, gxa, gb);
            if (prob.kkt_residual(gxa, gb, xb) < options.tolerance) {
                fit.converged = true;
                break;
            }
        }
        const double f_y = prob.loss(eta_y);
        prob.gradient(eta_y, ga, gb);

        // Backtracking: accept the first L with a valid quadratic upper bound.
        l *= 0.9;
        double za;
        double f_z;
        for (;;) {
            za = ya - ga / l;
            for (Eigen::Index j = 0; j < p; ++j) zb(j) = soft(yb(j) - gb(j) / l, lambda / l);
            f_z = prob.smooth(za, zb, eta_z);
            const double da = za - ya;
            const double model = f_y + ga * da + gb.dot(zb - yb) + 0.5 * l * (da * da + (zb - yb).squaredNorm());
            if (f_z <= model + 1e-15 * std::abs(model) || l > 1e15) break;
            l *= 2.0;
        }
        const double big_f_z = f_z + prob.penalty(zb);

        // Monotone step: keep the better of z and the previous iterate.
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double prev_a = xa;
        prev_b = xb;
        eta_prev = eta_x;
        if (big_f_z <= f_x) {
            xa = za;
            xb = zb;
            eta_x = eta_z;
            f_x = big_f_z;
        }
        const double cz = t / t_next;
        const double cm = (t - 1.0) / t_next;
        ya = xa + cz * (za - xa) + cm * (xa - prev_a);
        yb = xb + cz * (zb - xb) + cm * (xb - prev_b);
        eta_y = eta_x + cz * (eta_z - eta_x) + cm * (eta_x - eta_prev);
        t = t_next;
        if (options.record_trace) fit.objective_trace.push_back(f_x);
    }
    warm.a = xa;
    warm.b = xb;
    warm.step_l = l;
    fit.intercept = xa;
    fit.coefficients = xb;
    fit.iterations = iter;
    return fit;
}

void require_two_classes(const VectorXi& d) {
    bool zero = false;
    bool one = false;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) == 0) {
            zero = true;
        } else if (d(i) == 1) {
            one = true;
        } else {
            throw DataError("logit lasso: response must be binary");
        }
    }
    if (!zero || !one) throw DataError("logit lasso: both classes must be present");
}

MatrixXd take_rows(const MatrixXd& m, const IndexVector& rows) {
    MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

VectorXi take_rows(const VectorXi& v, const IndexVector& rows) {
    VectorXi out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

bool has_both(const VectorXi& d) {
    return (d.array() == 0).any() && (d.array() == 1).any();
}

}  // namespace

double logit_lambda_max(const MatrixXd& q, const VectorXi& d) {
    const VectorXd dd = d.cast<double>();
    const VectorXd r = dd.array() - dd.mean();
    if (q.cols() == 0) return 0.0;
    return (q.transpose() * r).cwiseAbs().maxCoeff() / static_cast<double>(q.rows());
}

LogisticFit fit_logit_lasso_fixed(const MatrixXd& q, const VectorXi& d, double lambda,
                                  const LogitOptions& options) {
    if (q.rows() != d.size()) throw DataError("logit lasso: response length mismatch");
    if (!(lambda >= 0.0)) throw ConfigError("logit lasso: lambda must be non-negative");
    require_two_classes(d);
    Warm warm;
    return solve(q, d, lambda, options, warm);
}

LogisticFit fit_logit_lasso(const MatrixXd& q, const VectorXi& d, std::vector<double> lambda_grid,
                            int cv_folds, std::uint64_t seed, const LogitOptions& options, int n_lambda,
                            double lambda_min_ratio, int patience) {
    if (q.rows() != d.size()) throw DataError("logit lasso: response length mismatch");
    require_two_classes(d);
    if (cv_folds < 2) throw ConfigError("logit lasso: cv_folds must be at least 2");
    if (patience < 0) throw ConfigError("logit lasso: patience must be non-negative");
    if (lambda_grid.empty()) {
        if (n_lambda < 1) throw ConfigError("logit lasso: empty lambda grid");
        const double hi = std::max(logit_lambda_max(q, d), 1e-12);
        const double lo = hi * lambda_min_ratio;
        for (int i = 0; i < n_lambda; ++i) {
            const double frac = n_lambda == 1 ? 0.0 : static_cast<double>(i) / (n_lambda - 1);
            lambda_grid.push_back(hi * std::pow(lo / hi, frac));
        }
    }
    for (double v : lambda_grid) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("logit lasso: lambda grid must be positive");
    }
    // Path runs from the largest penalty down so each solve is warm-started.
    std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());

    LogitOptions path_options = options;
    path_options.record_trace = false;
    path_options.tolerance = std::max(options.tolerance, options.path_tolerance);

    const double unevaluated = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> deviance(lambda_grid.size(), unevaluated);
    const int folds = static_cast<int>(std::min<Eigen::Index>(cv_folds, q.rows()));

    struct CvFold {
        MatrixXd q_train;
        VectorXi d_train;
        MatrixXd q_test;
        VectorXi d_test;
        Warm warm;
    };
    std::vector<CvFold> cv;
    std::size_t scored = 0;
    if (folds >= 2) {
        const FoldPlan plan = make_folds(q.rows(), folds, seed);
        for (int f = 0; f < folds; ++f) {
            const IndexVector train = plan.complement(f);
            const IndexVector test = plan.fold(f);
            VectorXi d_train = take_rows(d, train);
            if (!has_both(d_train)) continue;
            cv.push_back({take_rows(q, train), std::move(d_train), take_rows(q, test), take_rows(d, test), Warm{}});
            scored += test.size();
        }
    }

    // All folds walk the path together so the pooled deviance is known after each
    // grid point; the walk stops once it has not improved for `patience` points.
    std::size_t best = 0;
    if (scored > 0) {
        std::size_t since_best = 0;
        for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
            double total = 0.0;
            for (auto& fold : cv) {
                const LogisticFit fit = solve(fold.q_train, fold.d_train, lambda_grid[g], path_options, fold.warm);
                const VectorXd eta = (fold.q_test * fit.coefficients).array() + fit.intercept;
                for (Eigen::Index i = 0; i < eta.size(); ++i) {
                    // -2 log-likelihood, written with log1p_exp for stability
                    total += 2.0 * (log1p_exp(eta(i)) - fold.d_test(i) * eta(i));
                }
            }
            deviance[g] = total / static_cast<double>(scored);
            // Strict improvement only: ties keep the larger penalty.
            if (g == 0 || deviance[g] < deviance[best]) {
                best = g;
                since_best = 0;
            } else if (patience > 0 && ++since_best >= static_cast<std::size_t>(patience)) {
                break;
            }
        }
    }

    Warm warm;
    LogisticFit fit;
    for (std::size_t g = 0; g <= best; ++g) {
        const LogitOptions& o = g == best ? options : path_options;
        fit = solve(q, d, lambda_grid[g], o, warm);
    }
    fit.cv_grid = lambda_grid;
    fit.cv_deviance = deviance;
    return fit;
}

}  // namespace orthodid
