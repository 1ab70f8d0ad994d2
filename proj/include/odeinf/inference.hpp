#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace odeinf {

/// Rowwise approximate inverse of the empirical covariance: row i solves
///   min m^T Sigma m  subject to  ||Sigma m - e_i||_inf <= mu
/// via coordinate descent on the penalized form
///   min 1/2 m^T Sigma m - e_i^T m + mu ||m||_1.
struct MMatrix {
    Eigen::MatrixXd rows;           // p x p; row i is m_i^T
    double mu = 0.0;                // requested mu
    Eigen::VectorXd mu_used;        // per-row mu after any escalation
    std::vector<bool> feasible;     // per-row feasibility at mu_used
};

MMatrix compute_M(const Eigen::MatrixXd& sigma_hat, double mu, double tol = 1e-8,
                  int max_sweeps = 10000);

struct DebiasedReport {
    Eigen::VectorXd estimates;       // bias-corrected, original column scale
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    Eigen::VectorXd p_values;
    std::vector<bool> selected;
    std::vector<std::string> warnings;  // per term, empty if none
    double sigma_hat = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
    double alpha = 0.05;
};

struct DebiasedOptions {
    std::optional<double> lambda;     // lasso penalty (un-normalized objective)
    std::optional<double> mu;         // default sqrt(log p / n)
    std::optional<double> sigma_hat;  // default: scaled lasso
    double alpha = 0.05;
    bool holm = false;                // selection on Holm-adjusted p-values
    Eigen::VectorXd penalty_factor;   // 0 entries unpenalized (intercept)
};

/// Lasso estimate plus the correction (1/n) M X^T (y - X beta), with normal
/// confidence intervals and p-values. Columns are scaled to norm sqrt(n)
/// internally and estimates are mapped back.
DebiasedReport debiased_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const DebiasedOptions& opt = {});

struct RidgeReport {
    Eigen::VectorXd estimates;  // bias-corrected, original column scale
    Eigen::VectorXd delta;      // bias bound per term
    Eigen::VectorXd p_values_raw;
    Eigen::VectorXd p_values_adjusted;
    std::vector<bool> selected;
    std::vector<bool> non_identifiable;  // P_jj below threshold
    Eigen::VectorXd p_diagonal;
    Eigen::VectorXd omega_diagonal;
    double xi = 0.05;
    double lambda = 0.0;
    double sigma_hat = 0.0;
    double alpha = 0.05;
};

struct RidgeOptions {
    std::optional<double> lambda;     // default 1/n
    double xi = 0.05;
    std::optional<double> sigma_hat;  // default: scaled lasso
    double alpha = 0.05;
    Eigen::VectorXd penalty_factor;
};

/// Projection-corrected ridge estimator with bias-bound p-values, Holm
/// adjusted. The correction's initial estimator is the scaled lasso's
/// companion coefficient vector.
RidgeReport bias_corrected_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const RidgeOptions& opt = {});

/// Step-down Holm multiplicity adjustment.
std::vector<double> holm_adjust(const std::vector<double>& p_values);

}  // namespace odeinf
