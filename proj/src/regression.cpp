#include "odeinf/regression.hpp"

#include "odeinf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace odeinf {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

Eigen::VectorXd resolve_penalty(const Eigen::VectorXd& penalty_factor, Eigen::Index p) {
    if (penalty_factor.size() == 0) return Eigen::VectorXd::Ones(p);
    if (penalty_factor.size() != p)
        throw std::invalid_argument("penalty_factor length must match column count");
    return penalty_factor;
}

}  // namespace

LassoFit lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
               const Eigen::VectorXd& penalty_factor, double tol, int max_sweeps) {
    if (lambda < 0) throw std::invalid_argument("lasso: lambda must be >= 0");
    if (X.rows() != y.size()) throw std::invalid_argument("lasso: X/y row mismatch");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("lasso: non-finite input");
    const Eigen::Index p = X.cols();
    Eigen::VectorXd pf = resolve_penalty(penalty_factor, p);

    Eigen::VectorXd col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j) col_sq(j) = X.col(j).squaredNorm();

    LassoFit fit;
    fit.lambda = lambda;
    fit.coefficients = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd residual = y;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_sq(j) <= 0) continue;
            double old = fit.coefficients(j);
            double rho = X.col(j).dot(residual) + col_sq(j) * old;
            double updated = soft_threshold(rho, lambda * pf(j) / 2.0) / col_sq(j);
            if (updated != old) {
                residual += X.col(j) * (old - updated);
                fit.coefficients(j) = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        fit.iterations = sweep + 1;
        if (max_change < tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

std::vector<double> default_lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        int count, double min_ratio) {
    double lambda_max = 2.0 * (X.transpose() * y).cwiseAbs().maxCoeff();
    if (lambda_max <= 0) lambda_max = 1.0;
    std::vector<double> grid(count);
    for (int i = 0; i < count; ++i)
        grid[i] = lambda_max * std::pow(min_ratio, static_cast<double>(i) / (count - 1));
    return grid;
}

LassoFit lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds,
                  const std::vector<double>& lambda_grid, const Eigen::VectorXd& penalty_factor) {
    if (lambda_grid.empty()) throw std::invalid_argument("lasso_cv: empty lambda grid");
    if (lambda_grid.size() == 1) return lasso(X, y, lambda_grid[0], penalty_factor);
    if (folds < 2) throw std::invalid_argument("lasso_cv: need at least 2 folds");
    const int n = static_cast<int>(X.rows());
    if (folds > n) throw std::invalid_argument("lasso_cv: more folds than rows");

    std::vector<double> cv_error(lambda_grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        // Contiguous time blocks: rows are autocorrelated, random folds leak.
        int lo = f * n / folds;
        int hi = (f + 1) * n / folds;
        int held = hi - lo;
        Eigen::MatrixXd Xtr(n - held, X.cols());
        Eigen::VectorXd ytr(n - held);
        Xtr.topRows(lo) = X.topRows(lo);
        ytr.head(lo) = y.head(lo);
        Xtr.bottomRows(n - hi) = X.bottomRows(n - hi);
        ytr.tail(n - hi) = y.tail(n - hi);

        Eigen::VectorXd warm = Eigen::VectorXd::Zero(X.cols());
        for (size_t g = 0; g < lambda_grid.size(); ++g) {
            LassoFit fit = lasso(Xtr, ytr, lambda_grid[g], penalty_factor);
            warm = fit.coefficients;
            Eigen::VectorXd pred = X.middleRows(lo, held) * fit.coefficients;
            cv_error[g] += (y.segment(lo, held) - pred).squaredNorm() / held;
        }
    }
    size_t best = std::min_element(cv_error.begin(), cv_error.end()) - cv_error.begin();
    return lasso(X, y, lambda_grid[best], penalty_factor);
}

Eigen::VectorXd ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
    if (lambda < 0) throw std::invalid_argument("ridge: lambda must be >= 0");
    const Eigen::Index p = X.cols();
    Eigen::MatrixXd gram = X.transpose() * X;
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd xty = X.transpose() * y;
    Eigen::VectorXd beta = ldlt.solve(xty);
    double rel = (gram * beta - xty).norm() / std::max(1e-300, xty.norm());
    if (ldlt.info() != Eigen::Success || rel > 1e-6)
        throw std::runtime_error("ridge: ill-conditioned system (rank-deficient X with lambda ~ 0)");
    (void)p;
    return beta;
}

NoiseEstimate scaled_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& penalty_factor, double tol,
                           int max_alternations) {
    const int n = static_cast<int>(X.rows());
    const Eigen::Index p = X.cols();
    if (n < 2) throw std::invalid_argument("scaled_lasso: need n >= 2");
    ColumnScaling scaling = scale_columns(X);
    const double lambda0 = std::sqrt(2.0 * std::log(static_cast<double>(std::max<Eigen::Index>(p, 2))) / n);

    NoiseEstimate est;
    est.sigma_hat = y.norm() / std::sqrt(static_cast<double>(n));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < max_alternations; ++it) {
        // Penalty lambda0*sigma in the 1/(2n) convention = 2n*lambda0*sigma here.
        double lambda = 2.0 * n * lambda0 * est.sigma_hat;
        LassoFit fit = lasso(scaling.scaled, y, lambda, penalty_factor);
        beta = fit.coefficients;
        double sigma = (y - scaling.scaled * beta).norm() / std::sqrt(static_cast<double>(n));
        est.iterations = it + 1;
        double change = std::fabs(sigma - est.sigma_hat);
        est.sigma_hat = sigma;
        if (change < tol) {
            est.converged = true;
            break;
        }
    }
    est.coefficients = scaling.to_original(beta);
    if (!est.converged)
        throw std::runtime_error("scaled_lasso: no convergence in " +
                                 std::to_string(max_alternations) + " alternations (sigma_hat=" +
                                 std::to_string(est.sigma_hat) + ")");
    return est;
}

OlsInference ols_inference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n <= p) throw std::invalid_argument("ols_inference: need n > number of columns");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        int bad = qr.colsPermutation().indices()(p - 1);
        throw std::invalid_argument("ols_inference: design is rank deficient (column " +
                                    std::to_string(bad) + " is collinear)");
    }

    OlsInference out;
    out.coefficients = qr.solve(y);
    Eigen::VectorXd residual = y - X * out.coefficients;
    out.dof = n - p;
    out.residual_variance = residual.squaredNorm() / out.dof;

    Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    out.standard_errors.resize(p);
    out.t_statistics.resize(p);
    out.p_values.resize(p);
    out.ci_lower.resize(p);
    out.ci_upper.resize(p);
    double tq = student_t_quantile(1.0 - alpha / 2.0, out.dof);
    for (int j = 0; j < p; ++j) {
        out.standard_errors(j) = std::sqrt(out.residual_variance * xtx_inv(j, j));
        out.t_statistics(j) = out.standard_errors(j) > 0
                                  ? out.coefficients(j) / out.standard_errors(j)
                                  : 0.0;
        out.p_values(j) = out.standard_errors(j) > 0
                              ? student_t_two_sided_p(out.t_statistics(j), out.dof)
                              : (out.coefficients(j) == 0.0 ? 1.0 : 0.0);
        out.ci_lower(j) = out.coefficients(j) - tq * out.standard_errors(j);
        out.ci_upper(j) = out.coefficients(j) + tq * out.standard_errors(j);
    }
    return out;
}

StlsResult stls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double threshold,
                int max_iters) {
    if (threshold < 0) throw std::invalid_argument("stls: threshold must be >= 0");
    const int p = static_cast<int>(X.cols());
    std::vector<bool> active(p, true);

    StlsResult result;
    result.coefficients = Eigen::VectorXd::Zero(p);
    for (int it = 0; it < max_iters; ++it) {
        result.iterations = it + 1;
        std::vector<int> idx;
        for (int j = 0; j < p; ++j)
            if (active[j]) idx.push_back(j);
        if (idx.empty()) {
            result.empty_active_set = true;
            result.coefficients.setZero();
            return result;
        }
        Eigen::MatrixXd Xa(X.rows(), idx.size());
        for (size_t k = 0; k < idx.size(); ++k) Xa.col(k) = X.col(idx[k]);
        Eigen::VectorXd ba = Xa.colPivHouseholderQr().solve(y);

        result.coefficients.setZero();
        bool changed = false;
        for (size_t k = 0; k < idx.size(); ++k) {
            if (std::fabs(ba(k)) < threshold) {
                active[idx[k]] = false;
                changed = true;
            } else {
                result.coefficients(idx[k]) = ba(k);
            }
        }
        if (!changed) return result;
    }
    return result;
}

ColumnScaling scale_columns(const Eigen::MatrixXd& X) {
    const double sqrt_n = std::sqrt(static_cast<double>(X.rows()));
    ColumnScaling cs;
    cs.scales.resize(X.cols());
    cs.scaled.resize(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double norm = X.col(j).norm();
        cs.scales(j) = norm > 0 ? norm / sqrt_n : 1.0;
        cs.scaled.col(j) = X.col(j) / cs.scales(j);
    }
    return cs;
}

}  // namespace odeinf
