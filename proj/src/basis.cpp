#include "odeinf/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace odeinf {

namespace {

void enumerate_degree(int dimension, int degree, int pos, std::vector<int>& current,
                      std::vector<std::vector<int>>& out) {
    if (pos == dimension - 1) {
        current[pos] = degree;
        out.push_back(current);
        return;
    }
    // Descending leading exponent gives lexicographic order within a degree
    // block (x1^2 before x1*x2 before x2^2).
    for (int e = degree; e >= 0; --e) {
        current[pos] = e;
        enumerate_degree(dimension, degree - e, pos + 1, current, out);
    }
}

}  // namespace

MonomialBasis build_basis(int dimension, int max_degree) {
    if (dimension < 1) throw std::invalid_argument("build_basis: dimension must be >= 1");
    if (max_degree < 1) throw std::invalid_argument("build_basis: max_degree must be >= 1");
    MonomialBasis basis;
    basis.dimension = dimension;
    basis.max_degree = max_degree;
    std::vector<int> current(dimension, 0);
    for (int deg = 0; deg <= max_degree; ++deg) {
        enumerate_degree(dimension, deg, 0, current, basis.exponents);
    }
    return basis;
}

std::string MonomialBasis::term_name(int j) const {
    const auto& expo = exponents.at(j);
    std::ostringstream os;
    bool first = true;
    for (int l = 0; l < dimension; ++l) {
        if (expo[l] == 0) continue;
        if (!first) os << "*";
        os << "x" << (l + 1);
        if (expo[l] > 1) os << "^" << expo[l];
        first = false;
    }
    if (first) return "1";
    return os.str();
}

std::vector<std::string> MonomialBasis::term_names() const {
    std::vector<std::string> names;
    names.reserve(exponents.size());
    for (int j = 0; j < size(); ++j) names.push_back(term_name(j));
    return names;
}

int MonomialBasis::index_of(const std::vector<int>& expo) const {
    auto it = std::find(exponents.begin(), exponents.end(), expo);
    if (it == exponents.end()) return -1;
    return static_cast<int>(it - exponents.begin());
}

std::vector<int> parse_term_name(const std::string& name, int dimension) {
    std::vector<int> expo(dimension, 0);
    if (name == "1") return expo;
    size_t pos = 0;
    while (pos < name.size()) {
        if (name[pos] != 'x')
            throw std::invalid_argument("parse_term_name: malformed term '" + name + "'");
        ++pos;
        size_t start = pos;
        while (pos < name.size() && std::isdigit(name[pos])) ++pos;
        if (pos == start)
            throw std::invalid_argument("parse_term_name: missing variable index in '" + name + "'");
        int var = std::stoi(name.substr(start, pos - start));
        if (var < 1 || var > dimension)
            throw std::invalid_argument("parse_term_name: variable out of range in '" + name + "'");
        int power = 1;
        if (pos < name.size() && name[pos] == '^') {
            ++pos;
            start = pos;
            while (pos < name.size() && std::isdigit(name[pos])) ++pos;
            if (pos == start)
                throw std::invalid_argument("parse_term_name: missing exponent in '" + name + "'");
            power = std::stoi(name.substr(start, pos - start));
        }
        expo[var - 1] += power;
        if (pos < name.size()) {
            if (name[pos] != '*')
                throw std::invalid_argument("parse_term_name: malformed term '" + name + "'");
            ++pos;
        }
    }
    return expo;
}

DesignMatrix evaluate_library(const Eigen::MatrixXd& states, const MonomialBasis& basis) {
    if (states.cols() != basis.dimension)
        throw std::invalid_argument("evaluate_library: state dimension mismatch");
    const int n = static_cast<int>(states.rows());
    const int m = basis.size();
    DesignMatrix dm;
    dm.basis = basis;
    dm.theta.resize(n, m);
    for (int j = 0; j < m; ++j) {
        const auto& expo = basis.exponents[j];
        for (int i = 0; i < n; ++i) {
            double v = 1.0;
            for (int l = 0; l < basis.dimension; ++l) {
                for (int e = 0; e < expo[l]; ++e) v *= states(i, l);
            }
            dm.theta(i, j) = v;
        }
    }
    return dm;
}

Eigen::VectorXd evaluate_library_row(const Eigen::VectorXd& state, const MonomialBasis& basis) {
    Eigen::VectorXd row(basis.size());
    for (int j = 0; j < basis.size(); ++j) {
        const auto& expo = basis.exponents[j];
        double v = 1.0;
        for (int l = 0; l < basis.dimension; ++l) {
            for (int e = 0; e < expo[l]; ++e) v *= state(l);
        }
        row(j) = v;
    }
    return row;
}

}  // namespace odeinf
