#include "orthodid/learners.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace orthodid {

namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const MatrixXd& x, const VectorXd& y, int mtry, int min_leaf, std::mt19937_64& rng)
        : x_(x), y_(y), mtry_(mtry), min_leaf_(min_leaf), rng_(rng) {
        features_.resize(static_cast<std::size_t>(x.cols()));
        std::iota(features_.begin(), features_.end(), 0);
    }

    RegressionTree build(std::vector<Eigen::Index> rows) {
        tree_.nodes.clear();
        grow(rows);
        return std::move(tree_);
    }

private:
    int grow(std::vector<Eigen::Index>& rows) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double sum = 0.0;
        double lo = y_(rows.front());
        double hi = lo;
        for (auto i : rows) {
            sum += y_(i);
            lo = std::min(lo, y_(i));
            hi = std::max(hi, y_(i));
        }
        const double n = static_cast<double>(rows.size());
        tree_.nodes[static_cast<std::size_t>(id)].value = sum / n;
        if (rows.size() < 2 * static_cast<std::size_t>(min_leaf_) || lo == hi) return id;

        const Split split = best_split(rows, sum);
        if (split.feature < 0) return id;

        std::vector<Eigen::Index> left;
        std::vector<Eigen::Index> right;
        for (auto i : rows) {
            (x_(i, split.feature) <= split.threshold ? left : right).push_back(i);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(left);
        const int r = grow(right);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    Split best_split(const std::vector<Eigen::Index>& rows, double total) {
        // Partial Fisher-Yates draws mtry distinct features.
        for (int k = 0; k < mtry_; ++k) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), features_.size() - 1);
            std::swap(features_[static_cast<std::size_t>(k)], features_[pick(rng_)]);
        }
        const double n = static_cast<double>(rows.size());
        const double parent = total * total / n;
        Split best;
        std::vector<std::pair<double, double>> order(rows.size());
        for (int k = 0; k < mtry_; ++k) {
            const int f = features_[static_cast<std::size_t>(k)];
            for (std::size_t r = 0; r < rows.size(); ++r) order[r] = {x_(rows[r], f), y_(rows[r])};
            std::sort(order.begin(), order.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_sum = 0.0;
            for (std::size_t r = 0; r + 1 < order.size(); ++r) {
                left_sum += order[r].second;
                if (order[r].first == order[r + 1].first) continue;
                const double nl = static_cast<double>(r + 1);
                const double nr = n - nl;
                if (nl < min_leaf_ || nr < min_leaf_) continue;
                const double right_sum = total - left_sum;
                // Reduction in within-child sum of squares.
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if (gain > best.gain + 1e-12 * std::abs(parent)) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = 0.5 * (order[r].first + order[r + 1].first);
                }
            }
        }
        return best;
    }

    const MatrixXd& x_;
    const VectorXd& y_;
    int mtry_;
    int min_leaf_;
    std::mt19937_64& rng_;
    std::vector<int> features_;
    RegressionTree tree_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

double RegressionTree::predict(RowConstRef x) const {
    int id = 0;
    for (;;) {
        const auto& node = nodes[static_cast<std::size_t>(id)];
        if (node.feature < 0) return node.value;
        id = x(node.feature) <= node.threshold ? node.left : node.right;
    }
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

ForestFit fit_random_forest(const MatrixXd& x, const VectorXd& y, int n_trees, int mtry, int min_leaf,
                            std::uint64_t seed, bool bootstrap) {
    if (x.rows() != y.size()) throw DataError("forest: response length mismatch");
    if (x.rows() < 1) throw DataError("forest: empty sample");
    if (n_trees < 1) throw ConfigError("forest: n_trees must be at least 1");
    if (mtry < 1 || mtry > x.cols()) throw ConfigError("forest: mtry must lie in [1, p]");
    if (min_leaf < 1) throw ConfigError("forest: min_leaf must be at least 1");

    ForestFit forest;
    forest.n_trees = n_trees;
    forest.mtry = mtry;
    forest.min_leaf = min_leaf;
    forest.n_features = static_cast<int>(x.cols());
    forest.seed = seed;
    forest.trees.reserve(static_cast<std::size_t>(n_trees));
    const auto m = static_cast<std::size_t>(x.rows());
    for (int t = 0; t < n_trees; ++t) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<Eigen::Index> rows(m);
        if (bootstrap) {
            std::uniform_int_distribution<Eigen::Index> draw(0, x.rows() - 1);
            for (auto& r : rows) r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        }
        TreeBuilder builder(x, y, mtry, min_leaf, rng);
        forest.trees.push_back(builder.build(std::move(rows)));
    }
    return forest;
}

double predict_forest(const ForestFit& fit, RowConstRef x0) {
    double sum = 0.0;
    for (const auto& tree : fit.trees) sum += tree.predict(x0);
    return sum / static_cast<double>(fit.trees.size());
}

}  // namespace orthodid
