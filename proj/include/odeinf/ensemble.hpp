#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace odeinf {

/// Bootstrap ensemble of sparse fits over paired row resamples of (X, y).
struct EnsembleReport {
    int q = 0;
    Eigen::VectorXd inclusion_probability;  // (nonzero count)/q per term
    Eigen::MatrixXd coefficient_samples;    // q x p, zeros included
};

using SparseFitFunction =
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

/// q row bootstrap samples (with replacement), each fitted by `fit`
/// (default: cross-validated lasso). Deterministic given the seed; each
/// sample draws from its own derived RNG so results are independent of
/// execution order. Samples whose resampled design has a constant column
/// where the original was not are redrawn (at most 10 times).
EnsembleReport esindy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int q,
                      std::uint64_t seed, SparseFitFunction fit = nullptr,
                      bool parallel = true);

enum class AggregateStatistic { Mean, Median };

/// Terms with inclusion probability below the threshold are zeroed; the rest
/// aggregate to the mean or median of their q samples (zeros included).
Eigen::VectorXd esindy_aggregate(const EnsembleReport& report, double threshold,
                                 AggregateStatistic statistic);

}  // namespace odeinf
