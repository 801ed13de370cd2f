#include "orthodid/learners.hpp"

#include <algorithm>
#include <cmath>

namespace orthodid {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

}  // namespace

LinearFit fit_lasso(const MatrixXd& q, const VectorXd& y, double lambda, const VectorXd& loadings,
                    const LassoOptions& options) {
    const Eigen::Index m = q.rows();
    const Eigen::Index p = q.cols();
    if (y.size() != m) throw DataError("lasso: response length does not match design rows");
    if (loadings.size() != p) throw DataError("lasso: loadings length does not match design columns");
    if (m < 1) throw DataError("lasso: empty sample");
    if (!(lambda >= 0.0)) throw ConfigError("lasso: lambda must be non-negative");
    if ((loadings.array() < 0.0).any()) throw ConfigError("lasso: loadings must be non-negative");

    // The unpenalized intercept is profiled out by centering.
    const VectorXd q_mean = q.colwise().mean();
    const double y_mean = y.mean();
    const MatrixXd qc = q.rowwise() - q_mean.transpose();
    const VectorXd col_sq = qc.colwise().squaredNorm();

    VectorXd beta = VectorXd::Zero(p);
    VectorXd resid = y.array() - y_mean;

    LinearFit fit;
    fit.converged = false;
    int sweep = 0;
    for (; sweep < options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_sq(j) <= 0.0) continue;
            const double old = beta(j);
            const double z = qc.col(j).dot(resid) + col_sq(j) * old;
            const double updated = soft_threshold(z, 0.5 * lambda * loadings(j)) / col_sq(j);
            if (updated != old) {
                resid.noalias() -= (updated - old) * qc.col(j);
                beta(j) = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        if (max_change < options.tolerance) {
            fit.converged = true;
            ++sweep;
            break;
        }
    }
    fit.coefficients = beta;
    fit.intercept = y_mean - q_mean.dot(beta);
    fit.lambda = lambda;
    fit.loadings = loadings;
    fit.iterations = sweep;
    return fit;
}

PenaltyChoice compute_penalty_loadings(const MatrixXd& q, const VectorXd& y, double c, double gamma,
                                       int refinements) {
    const Eigen::Index m = q.rows();
    const Eigen::Index p = q.cols();
    if (m < 2) throw DataError("penalty loadings need at least two observations");
    if (y.size() != m) throw DataError("penalty loadings: response length mismatch");
    if (!(c > 1.0)) throw ConfigError("penalty constant c must exceed 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("penalty gamma must lie in (0, 1)");
    if (refinements < 1) throw ConfigError("at least one refinement round is required");
    if (p < 1) throw DataError("penalty loadings need at least one regressor");

    auto loadings_from = [&](const VectorXd& resid) -> VectorXd {
        const VectorXd r2 = resid.array().square();
        return ((q.array().square().colwise() * r2.array()).colwise().sum() / static_cast<double>(m))
            .sqrt()
            .transpose();
    };

    PenaltyChoice out;
    out.lambda = 2.0 * c * std::sqrt(static_cast<double>(m)) *
                 normal_quantile(1.0 - gamma / (2.0 * static_cast<double>(p)));
    out.loadings = loadings_from(y.array() - y.mean());
    if ((out.loadings.array() == 0.0).all()) {
        throw DataError("degenerate response: all initial penalty loadings are zero");
    }
    out.history.push_back(out.loadings);
    for (int round = 0; round < refinements; ++round) {
        const LinearFit fit = fit_lasso(q, y, out.lambda, out.loadings);
        const VectorXd resid = (y - q * fit.coefficients).array() - fit.intercept;
        VectorXd next = loadings_from(resid);
        if ((next.array() == 0.0).all()) break;  // perfect fit; keep the previous loadings
        out.loadings = std::move(next);
        out.history.push_back(out.loadings);
    }
    return out;
}

LinearFit fit_lasso_auto(const MatrixXd& x, const VectorXd& y, const LearnerSpec& spec) {
    const MatrixXd q = expand_basis(x, spec.basis);
    const double m = static_cast<double>(q.rows());
    const double p = static_cast<double>(q.cols());
    const double gamma = spec.penalty_gamma.value_or(0.1 / std::log(std::max({p, m, 2.0})));
    const PenaltyChoice penalty = compute_penalty_loadings(q, y, spec.penalty_c, gamma, spec.refinements);
    LinearFit fit = fit_lasso(q, y, penalty.lambda, penalty.loadings);
    fit.basis = spec.basis;
    return fit;
}

}  // namespace orthodid
