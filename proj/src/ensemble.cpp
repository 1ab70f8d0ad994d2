#include "odeinf/ensemble.hpp"

#include "odeinf/regression.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace odeinf {

namespace {

bool has_degenerate_column(const Eigen::MatrixXd& Xb, const Eigen::MatrixXd& X) {
    for (Eigen::Index j = 0; j < Xb.cols(); ++j) {
        double spread = Xb.col(j).maxCoeff() - Xb.col(j).minCoeff();
        double orig_spread = X.col(j).maxCoeff() - X.col(j).minCoeff();
        if (orig_spread > 0 && spread == 0) return true;
    }
    return false;
}

}  // namespace

EnsembleReport esindy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int q,
                      std::uint64_t seed, SparseFitFunction fit, bool parallel) {
    if (q < 1) throw std::invalid_argument("esindy: q must be >= 1");
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());

    SparseFitFunction solver = fit;
    if (!solver) {
        solver = [](const Eigen::MatrixXd& Xb, const Eigen::VectorXd& yb) {
            // Columns are scaled to a common norm so the penalty treats
            // terms of different magnitudes evenly, and the lambda grid is
            // floored at lambda_max / 10: cross-validation on resampled rows
            // otherwise drifts to near-zero penalties, where every term
            // enters every fit and the inclusion probabilities carry no
            // information.
            ColumnScaling cs = scale_columns(Xb);
            LassoFit f = lasso_cv(cs.scaled, yb, 5, default_lambda_grid(cs.scaled, yb, 25, 1e-1));
            return Eigen::VectorXd(cs.to_original(f.coefficients));
        };
    }

    EnsembleReport report;
    report.q = q;
    report.coefficient_samples.resize(q, p);

    auto run_sample = [&](int s) {
        // Per-sample derived RNG keeps results schedule-independent.
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(s));
        std::uniform_int_distribution<int> pick(0, n - 1);
        Eigen::MatrixXd Xb(n, p);
        Eigen::VectorXd yb(n);
        for (int attempt = 0; attempt < 10; ++attempt) {
            for (int i = 0; i < n; ++i) {
                int r = pick(rng);
                Xb.row(i) = X.row(r);
                yb(i) = y(r);
            }
            if (!has_degenerate_column(Xb, X)) break;
        }
        report.coefficient_samples.row(s) = solver(Xb, yb).transpose();
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int s = 0; s < q; ++s) run_sample(s);
    } else {
        for (int s = 0; s < q; ++s) run_sample(s);
    }

    report.inclusion_probability.resize(p);
    for (int j = 0; j < p; ++j) {
        int nonzero = 0;
        for (int s = 0; s < q; ++s)
            if (report.coefficient_samples(s, j) != 0.0) ++nonzero;
        report.inclusion_probability(j) = static_cast<double>(nonzero) / q;
    }
    return report;
}

Eigen::VectorXd esindy_aggregate(const EnsembleReport& report, double threshold,
                                 AggregateStatistic statistic) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("esindy_aggregate: threshold must be in [0,1]");
    const int p = static_cast<int>(report.coefficient_samples.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) {
        if (report.inclusion_probability(j) < threshold) continue;
        if (statistic == AggregateStatistic::Mean) {
            out(j) = report.coefficient_samples.col(j).mean();
        } else {
            std::vector<double> vals(report.coefficient_samples.col(j).data(),
                                     report.coefficient_samples.col(j).data() + report.q);
            std::sort(vals.begin(), vals.end());
            out(j) = report.q % 2 ? vals[report.q / 2]
                                  : 0.5 * (vals[report.q / 2 - 1] + vals[report.q / 2]);
        }
    }
    return out;
}

}  // namespace odeinf
