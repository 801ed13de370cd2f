#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace orthodid {

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;
using VectorXi = Eigen::VectorXi;
using IndexVector = std::vector<Eigen::Index>;
using RowConstRef = Eigen::Ref<const Eigen::RowVectorXd>;

/// The three observation designs handled by the estimators.
enum class Design { RepeatedOutcomes, RepeatedCrossSection, Multilevel };

std::string_view to_string(Design design);
/// Accepts "ro", "rcs", "multi" (and the long spellings). Throws ConfigError.
Design parse_design(std::string_view text);

// Error taxonomy. The CLI maps each class to a distinct exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct EstimationError : Error {
    using Error::Error;
};

template <class Scalar>
inline Scalar logistic(Scalar u) {
    using std::exp;
    if (u >= Scalar(0)) {
        return Scalar(1) / (Scalar(1) + exp(-u));
    }
    const Scalar e = exp(u);
    return e / (Scalar(1) + e);
}

/// log(1 + exp(u)) without overflow.
inline double log1p_exp(double u) {
    return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

/// Inverse of the standard normal CDF (Wichura, AS 241), |rel err| < 1e-15.
double normal_quantile(double prob);

/// Mean of the rows selected by `rows`.
template <class Derived>
double mean_over(const Eigen::DenseBase<Derived>& values, const IndexVector& rows) {
    double sum = 0.0;
    for (auto i : rows) sum += values(i);
    return sum / static_cast<double>(rows.size());
}

}  // namespace orthodid
