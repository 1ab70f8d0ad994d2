#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "odeinf/regression.hpp"

namespace odeinf {

/// Empirical Bayes selection with a three-component prior on each
/// coefficient: gamma_k in {-1, 0, +1} with weights (p_L, p_0, p_R) and slab
/// u_k ~ N(mu_u, sigma_u^2). Fitted by coordinate-ascent EM on a variational
/// surrogate of the marginal likelihood.
struct SemmsModel {
    double p_left = 0.0, p_null = 0.0, p_right = 0.0;
    double slab_mean = 0.0;
    double slab_variance = 0.0;
    double error_variance = 0.0;
    Eigen::MatrixXd posterior;         // p x 3 columns (q_L, q_0, q_R)
    Eigen::VectorXd posterior_mean;    // E[gamma_k u_k] per predictor
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;
};

struct SemmsOptions {
    int max_iters = 1000;
    double tol = 1e-8;
    int restarts = 5;
    std::uint64_t seed = 0;
    /// Optional explicit initialization (overrides the correlation-based one).
    bool mirror_init = false;  // flip the signs of the correlation-based init
};

/// Pre: columns standardized (norm sqrt(n)), y centered. Throws on slab
/// variance collapse below 1e-12.
SemmsModel semms_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const SemmsOptions& opt = {});

struct SemmsSelection {
    std::vector<int> selected;            // indices with q_0 < threshold
    Eigen::VectorXd posterior_null;       // q_0 per predictor
    OlsInference refit;                   // on the selected columns (plus intercept)
    bool empty_selection = false;
    bool refit_includes_intercept = true;
};

SemmsSelection semms_select(const SemmsModel& model, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, double threshold = 0.5,
                            double alpha = 0.05);

}  // namespace odeinf
