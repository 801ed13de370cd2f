#include "orthodid/learners.hpp"

#include <algorithm>
#include <cmath>

namespace orthodid {

namespace {

MatrixXd squared_distances(const MatrixXd& x) {
    const Eigen::Index m = x.rows();
    const VectorXd norms = x.rowwise().squaredNorm();
    MatrixXd dist = -2.0 * (x * x.transpose());
    dist.colwise() += norms;
    dist.rowwise() += norms.transpose();
    dist = dist.cwiseMax(0.0);
    dist.diagonal().setZero();
    (void)m;
    return dist;
}

double loo_score_from_distances(const MatrixXd& dist, const VectorXd& y, double bandwidth) {
    const Eigen::Index m = y.size();
    const double scale = -0.5 / (bandwidth * bandwidth);
    const double total = y.sum();
    double sse = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        double num = 0.0;
        double den = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (j == i) continue;
            const double w = std::exp(scale * dist(j, i));
            num += w * y(j);
            den += w;
        }
        const double pred = den > 0.0 ? num / den : (total - y(i)) / static_cast<double>(m - 1);
        sse += (y(i) - pred) * (y(i) - pred);
    }
    return sse / static_cast<double>(m);
}

}  // namespace

std::vector<double> default_bandwidth_grid(const MatrixXd& x, int count, double lo, double hi) {
    if (count < 1) throw ConfigError("bandwidth grid needs at least one value");
    const double m = static_cast<double>(x.rows());
    double sd = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        sd += std::sqrt((x.col(j).array() - mean).square().sum() / std::max(1.0, m - 1.0));
    }
    sd = x.cols() > 0 ? sd / static_cast<double>(x.cols()) : 1.0;
    if (!(sd > 0.0)) sd = 1.0;
    const double base = sd * std::pow(m, -0.2);
    std::vector<double> grid;
    for (int i = 0; i < count; ++i) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        grid.push_back(base * lo * std::pow(hi / lo, frac));
    }
    return grid;
}

double kernel_loo_score(const MatrixXd& x, const VectorXd& y, double bandwidth) {
    return loo_score_from_distances(squared_distances(x), y, bandwidth);
}

KernelFit make_kernel_fit(const MatrixXd& x, const VectorXd& y, double bandwidth) {
    if (x.rows() != y.size()) throw DataError("kernel regression: response length mismatch");
    if (x.rows() < 1) throw DataError("kernel regression: empty sample");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw ConfigError("kernel regression: bandwidth must be positive and finite");
    }
    KernelFit fit;
    fit.train_x = x;
    fit.train_y = y;
    fit.bandwidth = bandwidth;
    fit.train_mean = y.mean();
    return fit;
}

KernelFit fit_kernel_regression(const MatrixXd& x, const VectorXd& y, std::vector<double> bandwidth_grid) {
    if (x.rows() != y.size()) throw DataError("kernel regression: response length mismatch");
    if (x.rows() < 2) throw DataError("kernel regression: at least two observations are required");
    if (bandwidth_grid.empty()) throw ConfigError("kernel regression: empty bandwidth grid");
    for (double h : bandwidth_grid) {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kernel regression: bandwidths must be positive");
    }
    std::sort(bandwidth_grid.begin(), bandwidth_grid.end());
    const MatrixXd dist = squared_distances(x);
    std::vector<double> scores;
    std::size_t best = 0;
    for (std::size_t g = 0; g < bandwidth_grid.size(); ++g) {
        scores.push_back(loo_score_from_distances(dist, y, bandwidth_grid[g]));
        // Grid ascends, so `<=` resolves ties toward the larger bandwidth.
        if (scores[g] <= scores[best]) best = g;
    }
    KernelFit fit = make_kernel_fit(x, y, bandwidth_grid[best]);
    fit.cv_grid = std::move(bandwidth_grid);
    fit.cv_scores = std::move(scores);
    return fit;
}

double predict_kernel(const KernelFit& fit, RowConstRef x0) {
    if (x0.size() != fit.train_x.cols()) throw DataError("kernel predict: dimension mismatch");
    const double scale = -0.5 / (fit.bandwidth * fit.bandwidth);
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < fit.train_x.rows(); ++i) {
        const double w = std::exp(scale * (fit.train_x.row(i) - x0).squaredNorm());
        num += w * fit.train_y(i);
        den += w;
    }
    if (den > 0.0) return num / den;
    fit.fallback_count->fetch_add(1, std::memory_order_relaxed);
    return fit.train_mean;
}

}  // namespace orthodid
