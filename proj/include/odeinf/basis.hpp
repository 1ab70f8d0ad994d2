#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace odeinf {

/// Multivariate monomial library of all terms with total degree <= max_degree,
/// in graded lexicographic order (degree ascending, then lexicographic).
/// The first term is always the constant.
struct MonomialBasis {
    int dimension = 0;
    int max_degree = 0;
    std::vector<std::vector<int>> exponents;

    int size() const { return static_cast<int>(exponents.size()); }

    /// Term name like "1", "x1", "x1^2*x2".
    std::string term_name(int j) const;
    std::vector<std::string> term_names() const;

    /// Index of an exponent vector, or -1 if absent.
    int index_of(const std::vector<int>& expo) const;
};

MonomialBasis build_basis(int dimension, int max_degree);

/// Inverse of term_name; throws std::invalid_argument on malformed names.
std::vector<int> parse_term_name(const std::string& name, int dimension);

struct DesignMatrix {
    Eigen::MatrixXd theta;
    MonomialBasis basis;
};

/// theta(i,j) = prod_l states(i,l)^exponents[j][l].
DesignMatrix evaluate_library(const Eigen::MatrixXd& states, const MonomialBasis& basis);

/// Single-row evaluation used by ODE right-hand sides.
Eigen::VectorXd evaluate_library_row(const Eigen::VectorXd& state, const MonomialBasis& basis);

}  // namespace odeinf
