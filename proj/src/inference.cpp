#include "odeinf/inference.hpp"

#include "odeinf/regression.hpp"
#include "odeinf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace odeinf {

namespace {

struct RowSolve {
    Eigen::VectorXd m;
    bool converged = false;
};

RowSolve solve_m_row(const Eigen::MatrixXd& sigma, int i, double mu, double tol, int max_sweeps) {
    const int p = static_cast<int>(sigma.rows());
    RowSolve rs;
    rs.m = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);  // Sigma * m
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0;
        for (int j = 0; j < p; ++j) {
            if (sigma(j, j) <= 0) continue;
            double old = rs.m(j);
            double rho = (j == i ? 1.0 : 0.0) - (grad(j) - sigma(j, j) * old);
            double z = rho;
            double updated;
            if (z > mu)
                updated = (z - mu) / sigma(j, j);
            else if (z < -mu)
                updated = (z + mu) / sigma(j, j);
            else
                updated = 0.0;
            if (updated != old) {
                grad += sigma.col(j) * (updated - old);
                rs.m(j) = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        if (max_change < tol) {
            rs.converged = true;
            break;
        }
    }
    return rs;
}

bool row_feasible(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& m, int i, double mu) {
    Eigen::VectorXd r = sigma * m;
    r(i) -= 1.0;
    return r.cwiseAbs().maxCoeff() <= mu + 1e-8;
}

}  // namespace

MMatrix compute_M(const Eigen::MatrixXd& sigma_hat, double mu, double tol, int max_sweeps) {
    if (sigma_hat.rows() != sigma_hat.cols())
        throw std::invalid_argument("compute_M: covariance must be square");
    if (mu < 0) throw std::invalid_argument("compute_M: mu must be >= 0");
    const int p = static_cast<int>(sigma_hat.rows());

    MMatrix M;
    M.mu = mu;
    M.rows.resize(p, p);
    M.mu_used.resize(p);
    M.feasible.assign(p, false);

    for (int i = 0; i < p; ++i) {
        double mu_i = mu;
        bool ok = false;
        for (int attempt = 0; attempt <= 8; ++attempt) {
            RowSolve rs = solve_m_row(sigma_hat, i, mu_i, tol, max_sweeps);
            if (rs.converged && row_feasible(sigma_hat, rs.m, i, mu_i)) {
                M.rows.row(i) = rs.m.transpose();
                M.mu_used(i) = mu_i;
                M.feasible[i] = true;
                ok = true;
                break;
            }
            mu_i *= 2;
        }
        if (!ok) {
            // Diagonal fallback keeps the estimator usable; flagged for the caller.
            M.rows.row(i).setZero();
            M.rows(i, i) = sigma_hat(i, i) > 0 ? 1.0 / sigma_hat(i, i) : 0.0;
            M.mu_used(i) = mu_i;
            M.feasible[i] = false;
        }
    }
    return M;
}

DebiasedReport debiased_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const DebiasedOptions& opt) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n < 2 || p < 1) throw std::invalid_argument("debiased_lasso: degenerate problem");

    ColumnScaling scaling = scale_columns(X);
    const Eigen::MatrixXd& Xs = scaling.scaled;
    Eigen::MatrixXd sigma = (Xs.transpose() * Xs) / n;

    DebiasedReport report;
    report.alpha = opt.alpha;
    const double logp_n = std::log(static_cast<double>(std::max(p, 2))) / n;

    if (opt.sigma_hat) {
        report.sigma_hat = *opt.sigma_hat;
    } else {
        report.sigma_hat = scaled_lasso(Xs, y, opt.penalty_factor).sigma_hat;
    }
    if (report.sigma_hat <= 0)
        throw std::invalid_argument("debiased_lasso: sigma_hat must be positive");

    // Rate prescriptions lambda = sigma*sqrt(c^2 log p / n) (c = 2) and
    // mu = a*sqrt(log p / n) (a = 1) are stated for the 1/(2n)-normalized
    // objective; 2n converts the penalty to the un-normalized one used here.
    report.lambda = opt.lambda ? *opt.lambda
                               : 2.0 * n * 2.0 * report.sigma_hat * std::sqrt(logp_n);
    report.mu = opt.mu ? *opt.mu : std::sqrt(logp_n);

    LassoFit fit = lasso(Xs, y, report.lambda, opt.penalty_factor);
    MMatrix M = compute_M(sigma, report.mu);

    Eigen::VectorXd residual = y - Xs * fit.coefficients;
    Eigen::VectorXd corrected = fit.coefficients + (M.rows * (Xs.transpose() * residual)) / n;
    Eigen::MatrixXd cov = M.rows * sigma * M.rows.transpose();

    const double z = normal_quantile(1.0 - opt.alpha / 2.0);
    report.estimates.resize(p);
    report.standard_errors.resize(p);
    report.ci_lower.resize(p);
    report.ci_upper.resize(p);
    report.p_values.resize(p);
    report.warnings.assign(p, "");
    for (int j = 0; j < p; ++j) {
        double se_scaled = report.sigma_hat * std::sqrt(std::max(0.0, cov(j, j)) / n);
        double est = corrected(j) / scaling.scales(j);
        double se = se_scaled / scaling.scales(j);
        report.estimates(j) = est;
        report.standard_errors(j) = se;
        report.ci_lower(j) = est - z * se;
        report.ci_upper(j) = est + z * se;
        if (se_scaled > 0) {
            double stat = std::sqrt(static_cast<double>(n)) * std::fabs(corrected(j)) /
                          (report.sigma_hat * std::sqrt(cov(j, j)));
            report.p_values(j) = 2.0 * (1.0 - normal_cdf(stat));
        } else {
            report.p_values(j) = corrected(j) == 0.0 ? 1.0 : 0.0;
        }
        if (!M.feasible[j])
            report.warnings[j] = "M row infeasible after mu escalation; diagonal fallback used";
        else if (M.mu_used(j) != report.mu)
            report.warnings[j] = "mu escalated to " + std::to_string(M.mu_used(j));
    }

    std::vector<double> pv(report.p_values.data(), report.p_values.data() + p);
    std::vector<double> basis_for_selection = opt.holm ? holm_adjust(pv) : pv;
    report.selected.resize(p);
    for (int j = 0; j < p; ++j) report.selected[j] = basis_for_selection[j] <= opt.alpha;

    // Deterministic regime: a residual scale at numerical precision relative
    // to the response makes z-statistics compare optimization rounding
    // against rounding noise. Fall back to relative-magnitude selection.
    const double y_rms = y.norm() / std::sqrt(static_cast<double>(n));
    if (report.sigma_hat < 1e-6 * y_rms) {
        double top = corrected.cwiseAbs().maxCoeff();
        for (int j = 0; j < p; ++j) {
            bool sel = top > 0 && std::fabs(corrected(j)) > 1e-3 * top;
            report.selected[j] = sel;
            report.p_values(j) = sel ? 0.0 : 1.0;
            if (report.warnings[j].empty())
                report.warnings[j] =
                    "residual variance at numerical precision; magnitude-based selection";
        }
    }
    return report;
}

RidgeReport bias_corrected_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const RidgeOptions& opt) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n < 2 || p < 1) throw std::invalid_argument("bias_corrected_ridge: degenerate problem");

    ColumnScaling scaling = scale_columns(X);
    const Eigen::MatrixXd& Xs = scaling.scaled;
    Eigen::MatrixXd sigma = (Xs.transpose() * Xs) / n;

    RidgeReport report;
    report.alpha = opt.alpha;
    report.xi = opt.xi;
    report.lambda = opt.lambda ? *opt.lambda : 1.0 / n;

    NoiseEstimate noise;
    bool have_noise = false;
    if (opt.sigma_hat) {
        report.sigma_hat = *opt.sigma_hat;
    } else {
        noise = scaled_lasso(Xs, y, opt.penalty_factor);
        report.sigma_hat = noise.sigma_hat;
        have_noise = true;
    }
    if (report.sigma_hat <= 0)
        throw std::invalid_argument("bias_corrected_ridge: sigma_hat must be positive");

    // Initial estimator for the correction term: the scaled lasso's companion
    // coefficient vector (an ordinary lasso at its joint penalty).
    Eigen::VectorXd beta_init =
        have_noise ? noise.coefficients : scaled_lasso(Xs, y, opt.penalty_factor).coefficients;

    Eigen::VectorXd beta_ridge = ridge(Xs, y, report.lambda);

    // P = Xs^T (Xs Xs^T)^- Xs via SVD; V columns with nonzero singular values.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    int rank = 0;
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
        if (svd.singularValues()(k) > 1e-10 * smax) ++rank;
    Eigen::MatrixXd V = svd.matrixV().leftCols(rank);
    Eigen::MatrixXd P = V * V.transpose();

    double lambda_cov = report.lambda / n;  // ridge lambda in Sigma-hat scale
    Eigen::MatrixXd reg = sigma;
    reg.diagonal().array() += lambda_cov;
    Eigen::MatrixXd reg_inv = reg.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd omega = reg_inv * sigma * reg_inv;

    const double delta_rate = std::pow(std::log(static_cast<double>(std::max(p, 2))) / n,
                                       0.5 - opt.xi);

    report.estimates.resize(p);
    report.delta.resize(p);
    report.p_values_raw.resize(p);
    report.p_diagonal = P.diagonal();
    report.omega_diagonal = omega.diagonal();
    report.non_identifiable.assign(p, false);

    Eigen::VectorXd corrected_scaled(p);
    for (int j = 0; j < p; ++j) {
        double pjj = P(j, j);
        if (std::fabs(pjj) < 1e-10) {
            report.non_identifiable[j] = true;
            corrected_scaled(j) = 0.0;
            report.delta(j) = 0.0;
            report.p_values_raw(j) = 1.0;
            report.estimates(j) = 0.0;
            continue;
        }
        double correction = 0.0;
        double max_ratio = 0.0;
        for (int k = 0; k < p; ++k) {
            if (k == j) continue;
            correction += (P(j, k) / pjj) * beta_init(k);
            max_ratio = std::max(max_ratio, std::fabs(P(j, k) / pjj));
        }
        corrected_scaled(j) = beta_ridge(j) / pjj - correction;
        report.delta(j) = max_ratio * delta_rate;
        double excess = std::max(0.0, std::fabs(corrected_scaled(j)) - report.delta(j));
        // sqrt(n) standardization: Var(beta_ridge) = sigma^2 Omega / n, so the
        // P = I, lambda -> 0 limit recovers the classical z-test.
        double stat = std::sqrt(static_cast<double>(n)) * std::fabs(pjj) * excess /
                      (report.sigma_hat * std::sqrt(std::max(1e-300, omega(j, j))));
        report.p_values_raw(j) = 2.0 * (1.0 - normal_cdf(stat));
        report.estimates(j) = corrected_scaled(j) / scaling.scales(j);
    }

    std::vector<double> raw(report.p_values_raw.data(), report.p_values_raw.data() + p);
    std::vector<double> adj = holm_adjust(raw);
    report.p_values_adjusted = Eigen::Map<Eigen::VectorXd>(adj.data(), p);
    report.selected.resize(p);
    for (int j = 0; j < p; ++j) report.selected[j] = adj[j] <= opt.alpha;

    // Same deterministic-regime fallback as the debiased lasso: with the
    // residual at numerical precision the bias-bound test is meaningless.
    const double y_rms = y.norm() / std::sqrt(static_cast<double>(n));
    if (report.sigma_hat < 1e-6 * y_rms) {
        double top = corrected_scaled.cwiseAbs().maxCoeff();
        for (int j = 0; j < p; ++j) {
            bool sel = top > 0 && !report.non_identifiable[j] &&
                       std::fabs(corrected_scaled(j)) > 1e-3 * top;
            report.selected[j] = sel;
            report.p_values_raw(j) = sel ? 0.0 : 1.0;
            report.p_values_adjusted(j) = sel ? 0.0 : 1.0;
        }
    }
    return report;
}

std::vector<double> holm_adjust(const std::vector<double>& p_values) {
    const int m = static_cast<int>(p_values.size());
    for (double p : p_values)
        if (p < 0.0 || p > 1.0 || std::isnan(p))
            throw std::invalid_argument("holm_adjust: p-values must be in [0,1]");
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&p_values](int a, int b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m);
    double running_max = 0.0;
    for (int rank = 0; rank < m; ++rank) {
        double scaled = std::min(1.0, (m - rank) * p_values[order[rank]]);
        running_max = std::max(running_max, scaled);
        adjusted[order[rank]] = running_max;
    }
    return adjusted;
}

}  // namespace odeinf
