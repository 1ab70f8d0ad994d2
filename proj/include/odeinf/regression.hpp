#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace odeinf {

/// Solves min ||y - X b||_2^2 + lambda ||b||_1 (un-normalized objective) by
/// cyclic coordinate descent. penalty_factor scales the penalty per column;
/// 0 leaves a column (e.g. the intercept) unpenalized.
struct LassoFit {
    Eigen::VectorXd coefficients;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
};

LassoFit lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
               const Eigen::VectorXd& penalty_factor = Eigen::VectorXd(),
               double tol = 1e-8, int max_sweeps = 100000);

/// K-fold cross-validation over a lambda grid; folds are contiguous time
/// blocks since rows are time-ordered. Returns the refit on all data at the
/// lambda with smallest mean out-of-fold squared error.
LassoFit lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds,
                  const std::vector<double>& lambda_grid,
                  const Eigen::VectorXd& penalty_factor = Eigen::VectorXd());

/// Geometric lambda grid from lambda_max = 2||X^T y||_inf down, for lasso_cv.
std::vector<double> default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        int count = 50, double min_ratio = 1e-4);

/// (X^T X + lambda I)^-1 X^T y via a stable linear solve.
Eigen::VectorXd ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

/// Joint coefficient / noise-sd estimation (scaled Lasso). Columns are scaled
/// to norm sqrt(n) internally; coefficients are reported on the original scale.
struct NoiseEstimate {
    double sigma_hat = 0.0;
    Eigen::VectorXd coefficients;
    int iterations = 0;
    bool converged = false;
};

NoiseEstimate scaled_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& penalty_factor = Eigen::VectorXd(),
                           double tol = 1e-6, int max_alternations = 500);

struct OlsInference {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd t_statistics;
    Eigen::VectorXd p_values;
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    double residual_variance = 0.0;
    int dof = 0;
};

/// Classical least squares with t-based two-sided p-values and (1-alpha)
/// confidence intervals. Throws on rank deficiency, naming a collinear column.
OlsInference ols_inference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double alpha = 0.05);

/// Sequentially-thresholded least squares (SINDy baseline).
struct StlsResult {
    Eigen::VectorXd coefficients;
    bool empty_active_set = false;
    int iterations = 0;
};

StlsResult stls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double threshold,
                int max_iters = 50);

/// Column transform used by pipelines: scale each column to norm sqrt(n) so
/// X^T X / n has unit diagonal. Zero-variance columns keep scale 1.
struct ColumnScaling {
    Eigen::VectorXd scales;
    Eigen::MatrixXd scaled;
    Eigen::VectorXd to_original(const Eigen::VectorXd& beta_scaled) const {
        return beta_scaled.cwiseQuotient(scales);
    }
};

ColumnScaling scale_columns(const Eigen::MatrixXd& X);

}  // namespace odeinf
