#pragma once

#include "orthodid/core.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace orthodid {

/// N x p matrix of controls. All entries must be finite.
struct CovariateMatrix {
    MatrixXd values;
    std::vector<std::string> column_names;  // empty or length p

    CovariateMatrix() = default;
    explicit CovariateMatrix(MatrixXd v, std::vector<std::string> names = {});

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    void validate() const;
};

struct RepeatedOutcomesData {
    VectorXd y_pre;
    VectorXd y_post;
    VectorXi d;
    CovariateMatrix x;

    Eigen::Index size() const { return d.size(); }
    VectorXd delta_y() const { return y_post - y_pre; }
    void validate() const;
};

struct RepeatedCrossSectionData {
    VectorXd y;
    VectorXi t;
    VectorXi d;
    CovariateMatrix x;

    Eigen::Index size() const { return d.size(); }
    void validate() const;
};

struct MultilevelData {
    VectorXd y_pre;
    VectorXd y_post;
    VectorXi w;
    CovariateMatrix x;
    int levels = 0;  // J: number of nonzero treatment levels

    Eigen::Index size() const { return w.size(); }
    VectorXd delta_y() const { return y_post - y_pre; }
    void validate() const;
};

using Dataset = std::variant<RepeatedOutcomesData, RepeatedCrossSectionData, MultilevelData>;

Design design_of(const Dataset& data);
Eigen::Index size_of(const Dataset& data);
const CovariateMatrix& covariates_of(const Dataset& data);

/// K-way partition of 0..N-1 used for cross-fitting.
struct FoldPlan {
    int k = 0;
    VectorXi assignment;
    std::uint64_t seed = 0;

    Eigen::Index size() const { return assignment.size(); }
    IndexVector fold(int index) const;
    /// Indices outside `index` (the auxiliary sample).
    IndexVector complement(int index) const;
    std::vector<Eigen::Index> fold_sizes() const;
};

/// Seeded uniform permutation of 0..n-1 cut into k contiguous blocks whose
/// sizes differ by at most one. Throws ConfigError unless 2 <= k <= n.
FoldPlan make_folds(Eigen::Index n, int k, std::uint64_t seed);

/// Role -> column name. Recognised roles: y_pre, y_post, treat, y, time, level.
struct ColumnMap {
    std::map<std::string, std::string> roles;
    /// Explicit covariate columns. When empty, every remaining numeric column is used.
    std::vector<std::string> covariates;
};

struct LoadResult {
    Dataset dataset;
    std::size_t rows_read = 0;
    std::size_t rows_rejected = 0;  // rows with a missing value in a used column
};

LoadResult load_dataset(const std::filesystem::path& path, Design design, const ColumnMap& columns);
LoadResult read_dataset(std::istream& in, Design design, const ColumnMap& columns);

/// Writes the dataset with a header and 17 significant digits per value.
void write_csv(std::ostream& out, const Dataset& data);

/// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);

}  // namespace orthodid
