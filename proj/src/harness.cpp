#include "odeinf/harness.hpp"

#include "odeinf/ensemble.hpp"
#include "odeinf/inference.hpp"
#include "odeinf/regression.hpp"
#include "odeinf/semms.hpp"
#include "odeinf/spline.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace odeinf {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string opt_field(const std::optional<double>& v) { return v ? fmt(*v) : ""; }
std::string opt_bool(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : ""; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}
std::optional<bool> parse_opt_bool(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return s == "1" || s == "true";
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Lasso: return "lasso";
        case Method::DebiasedLasso: return "debiased_lasso";
        case Method::BcRidge: return "bc_ridge";
        case Method::Semms: return "semms";
        case Method::Esindy: return "esindy";
        case Method::Stls: return "stls";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "lasso") return Method::Lasso;
    if (name == "debiased_lasso") return Method::DebiasedLasso;
    if (name == "bc_ridge") return Method::BcRidge;
    if (name == "semms") return Method::Semms;
    if (name == "esindy") return Method::Esindy;
    if (name == "stls") return Method::Stls;
    throw std::invalid_argument("unknown method '" + name + "'");
}

Eigen::VectorXd ExperimentConfig::resolved_x0() const {
    if (!x0.empty()) {
        Eigen::VectorXd v(x0.size());
        for (size_t i = 0; i < x0.size(); ++i) v(static_cast<Eigen::Index>(i)) = x0[i];
        return v;
    }
    Eigen::VectorXd v(2);
    if (system == "spiral")
        v << 2.0, 0.0;
    else if (system == "lotka_volterra")
        v << 1.0, 0.5;
    else
        v << 1.0, 0.0;
    return v;
}

void ExperimentConfig::validate() const {
    if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (methods.empty()) throw std::invalid_argument("config: methods must be non-empty");
    if (degree < 1) throw std::invalid_argument("config: degree must be >= 1");
    if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("config: alpha must be in (0,1)");
    if (noise_sigma < 0) throw std::invalid_argument("config: noise must be >= 0");
    if (resolved_step() <= 0) throw std::invalid_argument("config: step must be positive");
    if (!noise_grid.empty() && !n_grid.empty())
        throw std::invalid_argument("config: specify a noise grid or a sample-size grid, not both");
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

using nlohmann::json;

void apply_json(ExperimentConfig& cfg, const json& j) {
    if (j.contains("system")) cfg.system = j["system"].get<std::string>();
    if (j.contains("mu")) cfg.params.mu = j["mu"].get<double>();
    if (j.contains("alpha_sys")) cfg.params.alpha = j["alpha_sys"].get<double>();
    if (j.contains("beta_sys")) cfg.params.beta = j["beta_sys"].get<double>();
    if (j.contains("gamma_sys")) cfg.params.gamma = j["gamma_sys"].get<double>();
    if (j.contains("delta_sys")) cfg.params.delta = j["delta_sys"].get<double>();
    if (j.contains("x0")) cfg.x0 = j["x0"].get<std::vector<double>>();
    if (j.contains("t0")) cfg.t0 = j["t0"].get<double>();
    if (j.contains("t_end")) cfg.t_end = j["t_end"].get<double>();
    if (j.contains("step")) cfg.step = j["step"].get<double>();
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("noise")) cfg.noise_sigma = j["noise"].get<double>();
    if (j.contains("noise_mode")) {
        std::string m = j["noise_mode"].get<std::string>();
        if (m == "absolute")
            cfg.noise_mode = NoiseConfig::Mode::Absolute;
        else if (m == "max_scaled")
            cfg.noise_mode = NoiseConfig::Mode::MaxScaled;
        else
            throw std::invalid_argument("config: noise_mode must be absolute or max_scaled");
    }
    if (j.contains("derivative_source")) {
        std::string d = j["derivative_source"].get<std::string>();
        if (d == "spline")
            cfg.derivative_source = DerivativeSource::Spline;
        else if (d == "finite_difference")
            cfg.derivative_source = DerivativeSource::FiniteDifference;
        else if (d == "exact")
            cfg.derivative_source = DerivativeSource::Exact;
        else
            throw std::invalid_argument("config: unknown derivative_source '" + d + "'");
    }
    if (j.contains("degree")) cfg.degree = j["degree"].get<int>();
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : j["methods"]) cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
    if (j.contains("replicates")) cfg.replicates = j["replicates"].get<int>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("esindy_q")) cfg.esindy_q = j["esindy_q"].get<int>();
    if (j.contains("stls_threshold")) cfg.stls_threshold = j["stls_threshold"].get<double>();
    if (j.contains("parallel")) cfg.parallel = j["parallel"].get<bool>();
    if (j.contains("noise_grid")) cfg.noise_grid = j["noise_grid"].get<std::vector<double>>();
    if (j.contains("n_grid")) cfg.n_grid = j["n_grid"].get<std::vector<int>>();
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["system"] = cfg.system;
    j["mu"] = cfg.params.mu;
    j["alpha_sys"] = cfg.params.alpha;
    j["beta_sys"] = cfg.params.beta;
    j["gamma_sys"] = cfg.params.gamma;
    j["delta_sys"] = cfg.params.delta;
    if (!cfg.x0.empty()) j["x0"] = cfg.x0;
    j["t0"] = cfg.t0;
    j["t_end"] = cfg.t_end;
    j["step"] = cfg.step;
    if (cfg.n) j["n"] = *cfg.n;
    j["noise"] = cfg.noise_sigma;
    j["noise_mode"] = cfg.noise_mode == NoiseConfig::Mode::Absolute ? "absolute" : "max_scaled";
    j["derivative_source"] = cfg.derivative_source == DerivativeSource::Spline
                                 ? "spline"
                                 : (cfg.derivative_source == DerivativeSource::FiniteDifference
                                        ? "finite_difference"
                                        : "exact");
    j["degree"] = cfg.degree;
    std::vector<std::string> methods;
    for (Method m : cfg.methods) methods.push_back(method_name(m));
    j["methods"] = methods;
    j["replicates"] = cfg.replicates;
    j["alpha"] = cfg.alpha;
    j["seed"] = cfg.seed;
    j["esindy_q"] = cfg.esindy_q;
    j["stls_threshold"] = cfg.stls_threshold;
    j["parallel"] = cfg.parallel;
    if (!cfg.noise_grid.empty()) j["noise_grid"] = cfg.noise_grid;
    if (!cfg.n_grid.empty()) j["n_grid"] = cfg.n_grid;
    j["out"] = cfg.out_dir;
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& json_text) {
    ExperimentConfig cfg;
    config_merge_json(cfg, json_text);
    return cfg;
}

void config_merge_json(ExperimentConfig& cfg, const std::string& json_text) {
    json j = json::parse(json_text);
    apply_json(cfg, j);
}

// ---------------------------------------------------------------------------
// Single run

const MethodDimReport* SingleRunResult::cell(Method m, int dim) const {
    for (const auto& c : cells)
        if (c.method == m && c.dim == dim) return &c;
    return nullptr;
}

namespace {

// Pipeline calibration constants for spline-derivative regressions.
// The smoother's error at the GCV optimum is itself smooth and correlates
// with the feature columns, which inference reads as signal; undersmoothing
// and a tighter decorrelation tolerance keep false positives controlled.
constexpr double kDerivativeLambdaFactor = 0.01;  // multiplier on the GCV lambda
constexpr double kDebiasMuFactor = 0.2;           // multiplier on sqrt(log p / n)
// A term counts as selected only when the posterior probability of it being
// zero is small, i.e. the evidence for inclusion is strong.
constexpr double kSemmsNullThreshold = 0.1;

MethodDimReport run_method(Method method, const ExperimentConfig& cfg, const MonomialBasis& basis,
                           const Eigen::MatrixXd& theta, const Eigen::VectorXd& y,
                           int dim, std::uint64_t seed) {
    MethodDimReport cell;
    cell.method = method;
    cell.dim = dim;
    const int p = basis.size();
    cell.terms.resize(p);
    for (int j = 0; j < p; ++j) cell.terms[j].term = basis.term_name(j);

    const int constant_idx = basis.index_of(std::vector<int>(basis.dimension, 0));
    Eigen::VectorXd penalty = Eigen::VectorXd::Ones(p);
    if (constant_idx >= 0) penalty(constant_idx) = 0.0;

    auto set_selected = [&cell](int j, bool sel) { cell.terms[j].selected = sel; };

    switch (method) {
        case Method::Lasso: {
            // Baseline: every column penalized (an unpenalized constant would
            // make the nonzero-support selection rule degenerate).
            ColumnScaling cs = scale_columns(theta);
            LassoFit fit = lasso_cv(cs.scaled, y, 5, default_lambda_grid(cs.scaled, y));
            Eigen::VectorXd beta = cs.to_original(fit.coefficients);
            cell.lambda = fit.lambda;
            for (int j = 0; j < p; ++j) {
                cell.terms[j].estimate = beta(j);
                set_selected(j, fit.coefficients(j) != 0.0);
            }
            break;
        }
        case Method::Stls: {
            StlsResult fit = stls(theta, y, cfg.stls_threshold);
            for (int j = 0; j < p; ++j) {
                cell.terms[j].estimate = fit.coefficients(j);
                set_selected(j, fit.coefficients(j) != 0.0);
            }
            break;
        }
        case Method::DebiasedLasso: {
            DebiasedOptions opt;
            opt.alpha = cfg.alpha;
            opt.penalty_factor = penalty;
            opt.holm = true;
            opt.mu = kDebiasMuFactor *
                     std::sqrt(std::log(static_cast<double>(p)) / theta.rows());
            DebiasedReport rep = debiased_lasso(theta, y, opt);
            cell.sigma_hat = rep.sigma_hat;
            cell.lambda = rep.lambda;
            cell.mu = rep.mu;
            for (int j = 0; j < p; ++j) {
                cell.terms[j].estimate = rep.estimates(j);
                cell.terms[j].std_error = rep.standard_errors(j);
                cell.terms[j].ci_lower = rep.ci_lower(j);
                cell.terms[j].ci_upper = rep.ci_upper(j);
                cell.terms[j].p_value = rep.p_values(j);
                set_selected(j, rep.selected[j]);
            }
            break;
        }
        case Method::BcRidge: {
            RidgeOptions opt;
            opt.alpha = cfg.alpha;
            opt.penalty_factor = penalty;
            RidgeReport rep = bias_corrected_ridge(theta, y, opt);
            cell.sigma_hat = rep.sigma_hat;
            cell.lambda = rep.lambda;
            for (int j = 0; j < p; ++j) {
                cell.terms[j].estimate = rep.estimates(j);
                cell.terms[j].p_value = rep.p_values_adjusted(j);
                set_selected(j, rep.selected[j]);
            }
            break;
        }
        case Method::Semms: {
            // Mixture prior applies to the non-constant terms; y is centered
            // so the constant enters only through the refit.
            std::vector<int> cols;
            for (int j = 0; j < p; ++j)
                if (j != constant_idx) cols.push_back(j);
            Eigen::MatrixXd Xnc(theta.rows(), cols.size());
            for (size_t c = 0; c < cols.size(); ++c) Xnc.col(c) = theta.col(cols[c]);
            Eigen::MatrixXd Xc = Xnc.rowwise() - Xnc.colwise().mean();
            ColumnScaling cs = scale_columns(Xc);
            Eigen::VectorXd yc = y.array() - y.mean();
            SemmsOptions sopt;
            sopt.seed = seed;
            SemmsModel model = semms_fit(cs.scaled, yc, sopt);
            cell.sigma_hat = std::sqrt(model.error_variance);
            // Deterministic regime: with the residual at numerical precision
            // the mixture posterior treats rounding-level coefficients as
            // signals; select by relative magnitude instead.
            double y_rms = std::sqrt(yc.squaredNorm() / std::max<Eigen::Index>(1, yc.size()));
            bool deterministic = *cell.sigma_hat < 1e-6 * y_rms;
            double top = model.posterior_mean.cwiseAbs().maxCoeff();
            for (size_t c = 0; c < cols.size(); ++c) {
                int j = cols[c];
                double q0 = model.posterior(static_cast<Eigen::Index>(c), 1);
                double pm = model.posterior_mean(static_cast<Eigen::Index>(c));
                if (deterministic) q0 = (top > 0 && std::fabs(pm) > 1e-3 * top) ? 0.0 : 1.0;
                cell.terms[j].post_null_prob = q0;
                cell.terms[j].estimate = pm / cs.scales(c);
                set_selected(j, q0 < kSemmsNullThreshold);
            }
            if (constant_idx >= 0) set_selected(constant_idx, false);
            break;
        }
        case Method::Esindy: {
            auto solver = [](const Eigen::MatrixXd& Xb, const Eigen::VectorXd& yb) {
                ColumnScaling cs = scale_columns(Xb);
                // Same floored grid as the ensemble's default solver; see
                // ensemble.cpp for the rationale.
                LassoFit fit =
                    lasso_cv(cs.scaled, yb, 5, default_lambda_grid(cs.scaled, yb, 25, 1e-1));
                return Eigen::VectorXd(cs.to_original(fit.coefficients));
            };
            EnsembleReport rep = esindy(theta, y, cfg.esindy_q, seed, solver, cfg.parallel);
            Eigen::VectorXd agg = esindy_aggregate(rep, 0.0, AggregateStatistic::Mean);
            for (int j = 0; j < p; ++j) {
                cell.terms[j].estimate = agg(j);
                cell.terms[j].post_null_prob = 1.0 - rep.inclusion_probability(j);
                // No selection flag: inclusion probabilities are reported as
                // is, without a threshold.
            }
            break;
        }
    }

    for (int j = 0; j < p; ++j)
        if (cell.terms[j].selected && *cell.terms[j].selected) cell.selected_indices.push_back(j);

    // OLS refit on the selected support (reported coefficients for recovery
    // comparisons; skipped when selection is empty or undefined).
    cell.refit_coefficients = Eigen::VectorXd::Zero(p);
    if (!cell.selected_indices.empty() &&
        static_cast<int>(cell.selected_indices.size()) < theta.rows()) {
        Eigen::MatrixXd Xs(theta.rows(), cell.selected_indices.size());
        for (size_t c = 0; c < cell.selected_indices.size(); ++c)
            Xs.col(c) = theta.col(cell.selected_indices[c]);
        try {
            OlsInference refit = ols_inference(Xs, y, cfg.alpha);
            for (size_t c = 0; c < cell.selected_indices.size(); ++c)
                cell.refit_coefficients(cell.selected_indices[c]) = refit.coefficients(c);
            cell.refit_ok = true;
        } catch (const std::exception&) {
            cell.refit_ok = false;
        }
    }
    return cell;
}

SingleRunResult run_pipeline(const ExperimentConfig& cfg, const Trajectory& clean,
                             const OdeSystemSpec* truth, std::uint64_t seed) {
    SingleRunResult result;
    const int d = static_cast<int>(clean.states.cols());
    result.basis = build_basis(d, cfg.degree);
    if (truth) result.true_coefficients = truth->true_coefficients;

    NoiseConfig noise;
    noise.sigma_scale = cfg.noise_sigma;
    noise.mode = cfg.noise_mode;
    noise.seed = seed;
    Trajectory noisy = add_noise(clean, noise);

    Eigen::MatrixXd states;
    Eigen::MatrixXd xdot(clean.times.size(), d);
    if (cfg.derivative_source == DerivativeSource::Exact) {
        if (!truth)
            throw std::invalid_argument("run_single: exact derivatives need a builtin system");
        states = clean.states;
        for (Eigen::Index i = 0; i < clean.times.size(); ++i)
            xdot.row(i) = truth->rhs(states.row(i).transpose()).transpose();
    } else {
        // Undersmooth relative to GCV: derivative regressions are badly
        // miscalibrated when the smoother's systematic error projects onto
        // the feature columns, and a small multiplier keeps that error
        // noise-like at the cost of some variance.
        SmoothingOptions smooth_opt;
        smooth_opt.lambda_factor = kDerivativeLambdaFactor;
        auto splines = fit_trajectory_splines(noisy, smooth_opt);
        states.resize(noisy.times.size(), d);
        for (int j = 0; j < d; ++j) states.col(j) = splines[static_cast<size_t>(j)].values;
        if (cfg.derivative_source == DerivativeSource::Spline)
            xdot = estimate_derivatives(splines, noisy.times);
        else
            xdot = finite_difference_derivatives(noisy.times, states);
    }

    Eigen::MatrixXd theta = evaluate_library(states, result.basis).theta;
    for (Method m : cfg.methods) {
        for (int dim = 1; dim <= d; ++dim) {
            try {
                result.cells.push_back(
                    run_method(m, cfg, result.basis, theta, xdot.col(dim - 1), dim, seed));
            } catch (const std::exception& e) {
                MethodDimReport cell;
                cell.method = m;
                cell.dim = dim;
                cell.error = e.what();
                for (int j = 0; j < result.basis.size(); ++j) {
                    cell.terms.emplace_back();
                    cell.terms.back().term = result.basis.term_name(j);
                }
                result.cells.push_back(std::move(cell));
            }
        }
    }
    return result;
}

}  // namespace

SingleRunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    OdeSystemSpec spec = builtin_system(cfg.system, cfg.params, cfg.degree);
    Trajectory clean = rk4_integrate(spec, cfg.resolved_x0(), cfg.t0, cfg.t_end,
                                     cfg.resolved_step());
    return run_pipeline(cfg, clean, &spec, seed);
}

SingleRunResult run_single_on_trajectory(const ExperimentConfig& cfg, const Trajectory& traj) {
    cfg.validate();
    return run_pipeline(cfg, traj, nullptr, cfg.seed);
}

// ---------------------------------------------------------------------------
// Sweeps

int SweepSummary::ok_replicates(int g, int m, int dim0) const {
    const Eigen::MatrixXd& sel = selections[g][m][dim0];
    int ok = 0;
    for (int r = 0; r < sel.rows(); ++r)
        if (!std::isnan(sel(r, 0))) ++ok;
    return ok;
}

double SweepSummary::selection_frequency(int g, int m, int dim0, int term) const {
    const Eigen::MatrixXd& sel = selections[g][m][dim0];
    double sum = 0;
    int ok = 0;
    for (int r = 0; r < sel.rows(); ++r) {
        if (std::isnan(sel(r, term))) continue;
        sum += sel(r, term);
        ++ok;
    }
    return ok ? sum / ok : kNaN;
}

double SweepSummary::success_rate(int g, int m, int dim0) const {
    if (methods[m] == Method::Esindy) return kNaN;
    const Eigen::MatrixXd& sel = selections[g][m][dim0];
    int ok = 0, hits = 0;
    for (int r = 0; r < sel.rows(); ++r) {
        if (std::isnan(sel(r, 0))) continue;
        ++ok;
        bool exact = true;
        for (int j = 0; j < sel.cols(); ++j) {
            bool is_true = std::find(true_support[dim0].begin(), true_support[dim0].end(), j) !=
                           true_support[dim0].end();
            if ((sel(r, j) != 0.0) != is_true) {
                exact = false;
                break;
            }
        }
        if (exact) ++hits;
    }
    return ok ? static_cast<double>(hits) / ok : kNaN;
}

double SweepSummary::system_success_rate(int g, int m) const {
    if (methods[m] == Method::Esindy) return kNaN;
    const int R = replicates;
    int ok = 0, hits = 0;
    for (int r = 0; r < R; ++r) {
        bool any_fail = false, all_exact = true;
        for (int dim0 = 0; dim0 < dimensions; ++dim0) {
            const Eigen::MatrixXd& sel = selections[g][m][dim0];
            if (std::isnan(sel(r, 0))) {
                any_fail = true;
                break;
            }
            for (int j = 0; j < sel.cols(); ++j) {
                bool is_true = std::find(true_support[dim0].begin(), true_support[dim0].end(),
                                         j) != true_support[dim0].end();
                if ((sel(r, j) != 0.0) != is_true) {
                    all_exact = false;
                    break;
                }
            }
            if (!all_exact) break;
        }
        if (any_fail) continue;
        ++ok;
        if (all_exact) ++hits;
    }
    return ok ? static_cast<double>(hits) / ok : kNaN;
}

SweepSummary sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool over_noise = !cfg.noise_grid.empty();
    if (!over_noise && cfg.n_grid.empty())
        throw std::invalid_argument("sweep: need a noise grid or a sample-size grid");

    OdeSystemSpec spec = builtin_system(cfg.system, cfg.params, cfg.degree);
    const int d = spec.dimension;
    const int G = over_noise ? static_cast<int>(cfg.noise_grid.size())
                             : static_cast<int>(cfg.n_grid.size());
    const int M = static_cast<int>(cfg.methods.size());
    const int R = cfg.replicates;

    SweepSummary summary;
    summary.grid_var = over_noise ? "sigma" : "n";
    summary.basis = build_basis(d, cfg.degree);
    summary.methods = cfg.methods;
    summary.dimensions = d;
    summary.replicates = R;
    const int p = summary.basis.size();

    summary.true_support.resize(d);
    for (int dim0 = 0; dim0 < d; ++dim0)
        for (int j = 0; j < p; ++j)
            if (spec.true_coefficients(j, dim0) != 0.0) summary.true_support[dim0].push_back(j);

    summary.selections.assign(
        G, std::vector<std::vector<Eigen::MatrixXd>>(
               M, std::vector<Eigen::MatrixXd>(d, Eigen::MatrixXd::Constant(R, p, kNaN))));
    summary.estimates = summary.selections;

    for (int g = 0; g < G; ++g) {
        ExperimentConfig point = cfg;
        if (over_noise) {
            point.noise_sigma = cfg.noise_grid[g];
            summary.grid_values.push_back(cfg.noise_grid[g]);
        } else {
            point.n = cfg.n_grid[g];
            summary.grid_values.push_back(static_cast<double>(cfg.n_grid[g]));
        }
        point.noise_grid.clear();
        point.n_grid.clear();

        std::vector<SingleRunResult> results(R);
        // Replicate-level parallelism; per-replicate numerics are identical to
        // the serial path since every replicate derives its own seed.
        ExperimentConfig inner = point;
        inner.parallel = false;
        if (cfg.parallel) {
#pragma omp parallel for schedule(dynamic)
            for (int r = 0; r < R; ++r) results[r] = run_single(inner, cfg.seed + r);
        } else {
            for (int r = 0; r < R; ++r) results[r] = run_single(inner, cfg.seed + r);
        }

        for (int r = 0; r < R; ++r) {
            for (int m = 0; m < M; ++m) {
                for (int dim0 = 0; dim0 < d; ++dim0) {
                    const MethodDimReport* cell = results[r].cell(cfg.methods[m], dim0 + 1);
                    if (!cell || !cell->ok()) continue;
                    for (int j = 0; j < p; ++j) {
                        const TermReport& t = cell->terms[j];
                        summary.estimates[g][m][dim0](r, j) = t.estimate ? *t.estimate : kNaN;
                        if (cfg.methods[m] == Method::Esindy)
                            summary.selections[g][m][dim0](r, j) =
                                t.post_null_prob ? 1.0 - *t.post_null_prob : kNaN;
                        else
                            summary.selections[g][m][dim0](r, j) =
                                (t.selected && *t.selected) ? 1.0 : 0.0;
                    }
                }
            }
        }
    }
    return summary;
}

// ---------------------------------------------------------------------------
// CSV emission and parsing

void write_coefficients_csv(const SingleRunResult& result, std::ostream& os) {
    os << "method,dim,term,estimate,stderr,ci_lo,ci_hi,pvalue,post_null_prob,selected\n";
    for (const auto& cell : result.cells) {
        if (!cell.ok()) continue;
        for (const auto& t : cell.terms) {
            os << method_name(cell.method) << "," << cell.dim << "," << t.term << ","
               << opt_field(t.estimate) << "," << opt_field(t.std_error) << ","
               << opt_field(t.ci_lower) << "," << opt_field(t.ci_upper) << ","
               << opt_field(t.p_value) << "," << opt_field(t.post_null_prob) << ","
               << opt_bool(t.selected) << "\n";
        }
    }
}

void write_sweep_csv(const SweepSummary& summary, std::ostream& os) {
    os << "grid_var,grid_value,method,dim,term,sel_freq,success_rate\n";
    for (size_t g = 0; g < summary.grid_values.size(); ++g) {
        for (size_t m = 0; m < summary.methods.size(); ++m) {
            for (int dim0 = 0; dim0 < summary.dimensions; ++dim0) {
                double success = summary.success_rate(static_cast<int>(g), static_cast<int>(m), dim0);
                for (int j = 0; j < summary.basis.size(); ++j) {
                    double freq = summary.selection_frequency(static_cast<int>(g),
                                                              static_cast<int>(m), dim0, j);
                    os << summary.grid_var << "," << fmt(summary.grid_values[g]) << ","
                       << method_name(summary.methods[m]) << "," << (dim0 + 1) << ","
                       << summary.basis.term_name(j) << ","
                       << (std::isnan(freq) ? "" : fmt(freq)) << ","
                       << (std::isnan(success) ? "" : fmt(success)) << "\n";
                }
            }
            double joint = summary.system_success_rate(static_cast<int>(g), static_cast<int>(m));
            os << summary.grid_var << "," << fmt(summary.grid_values[g]) << ","
               << method_name(summary.methods[m]) << ",all,,,"
               << (std::isnan(joint) ? "" : fmt(joint)) << "\n";
        }
    }
}

void write_boxplot_csv(const SweepSummary& summary, std::ostream& os) {
    os << "grid_var,grid_value,method,dim,term,replicate,estimate,selected\n";
    for (size_t g = 0; g < summary.grid_values.size(); ++g) {
        for (size_t m = 0; m < summary.methods.size(); ++m) {
            for (int dim0 = 0; dim0 < summary.dimensions; ++dim0) {
                const Eigen::MatrixXd& est = summary.estimates[g][m][dim0];
                const Eigen::MatrixXd& sel = summary.selections[g][m][dim0];
                for (int r = 0; r < summary.replicates; ++r) {
                    for (int j = 0; j < summary.basis.size(); ++j) {
                        os << summary.grid_var << "," << fmt(summary.grid_values[g]) << ","
                           << method_name(summary.methods[m]) << "," << (dim0 + 1) << ","
                           << summary.basis.term_name(j) << "," << r << ","
                           << (std::isnan(est(r, j)) ? "" : fmt(est(r, j))) << ",";
                        if (std::isnan(sel(r, j)))
                            os << "";
                        else if (summary.methods[m] == Method::Esindy)
                            os << fmt(sel(r, j));
                        else
                            os << (sel(r, j) != 0.0 ? "1" : "0");
                        os << "\n";
                    }
                }
            }
        }
    }
}

std::vector<CoefficientRow> read_coefficients_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("coefficients.csv: empty");
    std::vector<CoefficientRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto c = split_csv_line(line);
        if (c.size() != 10) throw std::invalid_argument("coefficients.csv: bad row");
        CoefficientRow row;
        row.method = c[0];
        row.dim = std::stoi(c[1]);
        row.term = c[2];
        row.estimate = parse_opt(c[3]);
        row.std_error = parse_opt(c[4]);
        row.ci_lower = parse_opt(c[5]);
        row.ci_upper = parse_opt(c[6]);
        row.p_value = parse_opt(c[7]);
        row.post_null_prob = parse_opt(c[8]);
        row.selected = parse_opt_bool(c[9]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("sweep.csv: empty");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto c = split_csv_line(line);
        if (c.size() != 7) throw std::invalid_argument("sweep.csv: bad row");
        SweepRow row;
        row.grid_var = c[0];
        row.grid_value = std::stod(c[1]);
        row.method = c[2];
        row.dim = c[3];
        row.term = c[4];
        row.sel_freq = parse_opt(c[5]);
        row.success_rate = parse_opt(c[6]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<BoxplotRow> read_boxplot_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("boxplot.csv: empty");
    std::vector<BoxplotRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto c = split_csv_line(line);
        if (c.size() != 8) throw std::invalid_argument("boxplot.csv: bad row");
        BoxplotRow row;
        row.method = c[2];
        row.dim = std::stoi(c[3]);
        row.term = c[4];
        row.replicate = std::stoi(c[5]);
        row.estimate = parse_opt(c[6]);
        row.selected = parse_opt_bool(c[7]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << contents;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream probe(std::filesystem::path(dir) / ".write_probe");
    if (!probe) throw std::runtime_error("output directory not writable: " + dir);
    probe.close();
    std::filesystem::remove(std::filesystem::path(dir) / ".write_probe", ec);
}

}  // namespace

void emit_single(const ExperimentConfig& cfg, const SingleRunResult& result, bool svg) {
    ensure_out_dir(cfg.out_dir);
    std::filesystem::path dir(cfg.out_dir);
    write_file(dir / "config.json", config_to_json(cfg));
    std::ostringstream os;
    write_coefficients_csv(result, os);
    write_file(dir / "coefficients.csv", os.str());
    if (svg) {
        std::istringstream in(os.str());
        auto rows = read_coefficients_csv(in);
        std::set<std::pair<std::string, int>> cells;
        for (const auto& r : rows) cells.insert({r.method, r.dim});
        for (const auto& [method, dim] : cells) {
            std::ostringstream svg_os;
            write_coefficients_svg(rows, method, dim, svg_os);
            write_file(dir / ("coefficients_" + method + "_dim" + std::to_string(dim) + ".svg"),
                       svg_os.str());
        }
    }
}

void emit_sweep(const ExperimentConfig& cfg, const SweepSummary& summary, bool svg) {
    ensure_out_dir(cfg.out_dir);
    std::filesystem::path dir(cfg.out_dir);
    write_file(dir / "config.json", config_to_json(cfg));
    std::ostringstream so;
    write_sweep_csv(summary, so);
    write_file(dir / "sweep.csv", so.str());
    std::ostringstream bo;
    write_boxplot_csv(summary, bo);
    write_file(dir / "boxplot.csv", bo.str());
    if (svg) {
        std::istringstream in(so.str());
        auto rows = read_sweep_csv(in);
        for (size_t m = 0; m < summary.methods.size(); ++m) {
            for (int dim0 = 0; dim0 < summary.dimensions; ++dim0) {
                std::vector<std::string> highlight;
                for (int j : summary.true_support[dim0])
                    highlight.push_back(summary.basis.term_name(j));
                std::ostringstream svg_os;
                write_sweep_svg(rows, method_name(summary.methods[m]),
                                std::to_string(dim0 + 1), highlight, svg_os);
                write_file(dir / ("sweep_" + method_name(summary.methods[m]) + "_dim" +
                                  std::to_string(dim0 + 1) + ".svg"),
                           svg_os.str());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// SVG renderers: deliberately small, matching the figures' layouts (selection
// frequency lines over the grid, coefficient error bars, per-term boxplots).

namespace {

constexpr int kWidth = 900, kHeight = 520, kMarginL = 60, kMarginB = 80, kMarginT = 30,
              kMarginR = 160;

struct SvgCanvas {
    std::ostringstream body;
    double x0, x1, y0, y1;  // data ranges

    double px(double x) const {
        return kMarginL + (x - x0) / (x1 - x0 + 1e-300) * (kWidth - kMarginL - kMarginR);
    }
    double py(double y) const {
        return kHeight - kMarginB - (y - y0) / (y1 - y0 + 1e-300) * (kHeight - kMarginB - kMarginT);
    }
    void line(double ax, double ay, double bx, double by, const std::string& style) {
        body << "<line x1='" << ax << "' y1='" << ay << "' x2='" << bx << "' y2='" << by
             << "' style='" << style << "'/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& extra = "") {
        body << "<text x='" << x << "' y='" << y << "' font-size='11' " << extra << ">" << s
             << "</text>\n";
    }
    std::string finish(const std::string& title) {
        std::ostringstream os;
        os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
           << kHeight << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
           << "<text x='" << kWidth / 2 << "' y='18' text-anchor='middle' font-size='14'>"
           << title << "</text>\n"
           << body.str() << "</svg>\n";
        return os.str();
    }
    void axes() {
        line(kMarginL, kMarginT, kMarginL, kHeight - kMarginB, "stroke:black");
        line(kMarginL, kHeight - kMarginB, kWidth - kMarginR, kHeight - kMarginB, "stroke:black");
    }
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                          "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
                          "#c5b0d5", "#c49c94", "#f7b6d2", "#dbdb8d", "#9edae5"};

}  // namespace

void write_sweep_svg(const std::vector<SweepRow>& rows, const std::string& method,
                     const std::string& dim, const std::vector<std::string>& highlight_terms,
                     std::ostream& os) {
    std::vector<std::string> terms;
    std::vector<double> grid;
    for (const auto& r : rows) {
        if (r.method != method || r.dim != dim || r.term.empty()) continue;
        if (std::find(terms.begin(), terms.end(), r.term) == terms.end()) terms.push_back(r.term);
        if (std::find(grid.begin(), grid.end(), r.grid_value) == grid.end())
            grid.push_back(r.grid_value);
    }
    std::sort(grid.begin(), grid.end());
    SvgCanvas c;
    c.x0 = grid.empty() ? 0 : grid.front();
    c.x1 = grid.empty() ? 1 : grid.back();
    c.y0 = 0;
    c.y1 = 1;
    c.axes();
    for (size_t t = 0; t < terms.size(); ++t) {
        bool green = std::find(highlight_terms.begin(), highlight_terms.end(), terms[t]) !=
                     highlight_terms.end();
        std::string color = green ? "#2ca02c" : kPalette[t % 15];
        std::ostringstream pts;
        for (double g : grid) {
            for (const auto& r : rows) {
                if (r.method == method && r.dim == dim && r.term == terms[t] &&
                    r.grid_value == g && r.sel_freq) {
                    pts << c.px(g) << "," << c.py(*r.sel_freq) << " ";
                }
            }
        }
        c.body << "<polyline fill='none' stroke='" << color << "' stroke-width='"
               << (green ? 2.5 : 1.2) << "' points='" << pts.str() << "'/>\n";
        c.text(kWidth - kMarginR + 8, kMarginT + 14 * (t + 1), terms[t],
               "fill='" + color + "'");
    }
    c.text(kMarginL - 40, kMarginT + 8, "1.0");
    c.text(kMarginL - 40, kHeight - kMarginB, "0.0");
    std::string grid_var = rows.empty() ? "grid" : rows.front().grid_var;
    c.text(kWidth / 2 - 20, kHeight - kMarginB + 30, grid_var);
    os << c.finish("selection frequency: " + method + ", equation " + dim);
}

void write_coefficients_svg(const std::vector<CoefficientRow>& rows, const std::string& method,
                            int dim, std::ostream& os) {
    std::vector<CoefficientRow> mine;
    for (const auto& r : rows)
        if (r.method == method && r.dim == dim) mine.push_back(r);
    SvgCanvas c;
    c.x0 = 0;
    c.x1 = static_cast<double>(mine.size());
    double lo = -1, hi = 1;
    for (const auto& r : mine) {
        if (r.ci_lower) lo = std::min(lo, *r.ci_lower);
        if (r.ci_upper) hi = std::max(hi, *r.ci_upper);
        if (r.estimate) {
            lo = std::min(lo, *r.estimate);
            hi = std::max(hi, *r.estimate);
        }
    }
    c.y0 = lo - 0.05 * (hi - lo);
    c.y1 = hi + 0.05 * (hi - lo);
    c.axes();
    c.line(c.px(c.x0), c.py(0), c.px(c.x1), c.py(0), "stroke:#cccccc");
    for (size_t i = 0; i < mine.size(); ++i) {
        double x = i + 0.5;
        const auto& r = mine[i];
        std::string color = (r.selected && *r.selected) ? "#2ca02c" : "#1f77b4";
        if (r.ci_lower && r.ci_upper)
            c.line(c.px(x), c.py(*r.ci_lower), c.px(x), c.py(*r.ci_upper), "stroke:" + color);
        if (r.estimate)
            c.body << "<circle cx='" << c.px(x) << "' cy='" << c.py(*r.estimate)
                   << "' r='3' fill='" << color << "'/>\n";
        c.body << "<text x='" << c.px(x) << "' y='" << (kHeight - kMarginB + 14)
               << "' font-size='10' text-anchor='end' transform='rotate(-45 " << c.px(x) << " "
               << (kHeight - kMarginB + 14) << ")'>" << r.term << "</text>\n";
        std::string note;
        if (r.p_value)
            note = "p=" + std::to_string(*r.p_value).substr(0, 5);
        else if (r.post_null_prob)
            note = "q0=" + std::to_string(*r.post_null_prob).substr(0, 5);
        if (!note.empty())
            c.body << "<text x='" << c.px(x) << "' y='" << (kHeight - kMarginB + 52)
                   << "' font-size='8' text-anchor='middle'>" << note << "</text>\n";
    }
    os << c.finish("coefficients: " + method + ", equation " + std::to_string(dim));
}

void write_boxplot_svg(const std::vector<BoxplotRow>& rows, const std::string& method, int dim,
                       const std::vector<std::string>& highlight_terms, std::ostream& os) {
    std::vector<std::string> terms;
    for (const auto& r : rows)
        if (r.method == method && r.dim == dim &&
            std::find(terms.begin(), terms.end(), r.term) == terms.end())
            terms.push_back(r.term);
    SvgCanvas c;
    c.x0 = 0;
    c.x1 = static_cast<double>(terms.size());
    double lo = -1, hi = 1;
    std::vector<std::vector<double>> samples(terms.size());
    for (const auto& r : rows) {
        if (r.method != method || r.dim != dim || !r.estimate) continue;
        size_t t = std::find(terms.begin(), terms.end(), r.term) - terms.begin();
        samples[t].push_back(*r.estimate);
        lo = std::min(lo, *r.estimate);
        hi = std::max(hi, *r.estimate);
    }
    c.y0 = lo - 0.05 * (hi - lo);
    c.y1 = hi + 0.05 * (hi - lo);
    c.axes();
    c.line(c.px(c.x0), c.py(0), c.px(c.x1), c.py(0), "stroke:#cccccc");
    for (size_t t = 0; t < terms.size(); ++t) {
        auto& v = samples[t];
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        auto quantile = [&v](double q) {
            double idx = q * (v.size() - 1);
            size_t i = static_cast<size_t>(idx);
            double frac = idx - i;
            return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
        };
        double q1 = quantile(0.25), q2 = quantile(0.5), q3 = quantile(0.75);
        bool green = std::find(highlight_terms.begin(), highlight_terms.end(), terms[t]) !=
                     highlight_terms.end();
        std::string color = green ? "#2ca02c" : "#1f77b4";
        double x = t + 0.5, w = 0.3;
        c.body << "<rect x='" << c.px(x - w / 2) << "' y='" << c.py(q3) << "' width='"
               << (c.px(x + w / 2) - c.px(x - w / 2)) << "' height='" << (c.py(q1) - c.py(q3))
               << "' fill='none' stroke='" << color << "'/>\n";
        c.line(c.px(x - w / 2), c.py(q2), c.px(x + w / 2), c.py(q2), "stroke:" + color);
        c.line(c.px(x), c.py(v.front()), c.px(x), c.py(q1), "stroke:" + color);
        c.line(c.px(x), c.py(q3), c.px(x), c.py(v.back()), "stroke:" + color);
        c.body << "<text x='" << c.px(x) << "' y='" << (kHeight - kMarginB + 14)
               << "' font-size='10' text-anchor='end' transform='rotate(-45 " << c.px(x) << " "
               << (kHeight - kMarginB + 14) << ")'>" << terms[t] << "</text>\n";
    }
    os << c.finish("coefficient distributions: " + method + ", equation " + std::to_string(dim));
}

}  // namespace odeinf
