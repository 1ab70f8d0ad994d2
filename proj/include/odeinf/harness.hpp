#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "odeinf/basis.hpp"
#include "odeinf/dynamics.hpp"

namespace odeinf {

enum class Method { Lasso, DebiasedLasso, BcRidge, Semms, Esindy, Stls };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class DerivativeSource { Spline, FiniteDifference, Exact };

struct ExperimentConfig {
    std::string system = "van_der_pol";
    SystemParams params;
    std::vector<double> x0;  // empty: per-system default
    double t0 = 0.0;
    double t_end = 15.0;
    double step = 0.05;
    std::optional<int> n;  // overrides step: step = (t_end - t0) / n

    double noise_sigma = 0.0;
    NoiseConfig::Mode noise_mode = NoiseConfig::Mode::MaxScaled;
    DerivativeSource derivative_source = DerivativeSource::Spline;

    int degree = 4;
    std::vector<Method> methods = {Method::Lasso, Method::DebiasedLasso, Method::BcRidge,
                                   Method::Semms};
    int replicates = 1;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int esindy_q = 500;
    double stls_threshold = 0.5;
    bool parallel = true;

    std::vector<double> noise_grid;  // sweep over sigma when non-empty
    std::vector<int> n_grid;         // sweep over sample size when non-empty
    std::string out_dir = ".";

    double resolved_step() const { return n ? (t_end - t0) / *n : step; }
    Eigen::VectorXd resolved_x0() const;
    void validate() const;  // throws std::invalid_argument
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& json_text);
/// Applies JSON fields on top of cfg (used so CLI flags override the file).
void config_merge_json(ExperimentConfig& cfg, const std::string& json_text);

struct TermReport {
    std::string term;
    std::optional<double> estimate;
    std::optional<double> std_error;
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
    std::optional<double> p_value;
    std::optional<double> post_null_prob;  // SEMMS posterior null / E-SINDy 1 - inclusion
    std::optional<bool> selected;
};

struct MethodDimReport {
    Method method = Method::Lasso;
    int dim = 0;  // 1-based state dimension
    std::vector<TermReport> terms;
    std::vector<int> selected_indices;
    Eigen::VectorXd refit_coefficients;  // full length, zeros off-support
    bool refit_ok = false;
    std::optional<double> sigma_hat, lambda, mu;
    std::string error;  // non-empty if this cell failed

    bool ok() const { return error.empty(); }
};

struct SingleRunResult {
    MonomialBasis basis;
    std::vector<MethodDimReport> cells;
    Eigen::MatrixXd true_coefficients;  // basis x d; empty for external data

    const MethodDimReport* cell(Method m, int dim) const;
};

/// Full pipeline on a builtin system: integrate, add noise, smooth, build the
/// library and derivative estimates, run every configured method per state
/// dimension. Per-cell failures are recorded, not propagated.
SingleRunResult run_single(const ExperimentConfig& cfg, std::uint64_t seed);

/// Same pipeline on externally supplied data (no ground truth available).
SingleRunResult run_single_on_trajectory(const ExperimentConfig& cfg, const Trajectory& traj);

struct SweepSummary {
    std::string grid_var;  // "n" or "sigma"
    std::vector<double> grid_values;
    MonomialBasis basis;
    std::vector<Method> methods;
    int dimensions = 0;
    int replicates = 0;

    // Per-replicate selection values, indexed [grid][method][dim]: a
    // replicates x terms matrix. Binary methods store 0/1, E-SINDy stores the
    // inclusion probability, failed cells store NaN.
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> selections;
    // Per-replicate coefficient estimates, same indexing; NaN on failure.
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> estimates;
    // True support per dim (term indices); empty when truth is unknown.
    std::vector<std::vector<int>> true_support;

    int ok_replicates(int g, int m, int dim0) const;
    double selection_frequency(int g, int m, int dim0, int term) const;
    /// Exact-support success rate; NaN for methods without a binary selection.
    double success_rate(int g, int m, int dim0) const;
    double system_success_rate(int g, int m) const;
};

SweepSummary sweep(const ExperimentConfig& cfg);

// CSV schemas. Empty statistics serialize as empty fields, never 0.
void write_coefficients_csv(const SingleRunResult& result, std::ostream& os);
void write_sweep_csv(const SweepSummary& summary, std::ostream& os);
void write_boxplot_csv(const SweepSummary& summary, std::ostream& os);

struct CoefficientRow {
    std::string method;
    int dim = 0;
    std::string term;
    std::optional<double> estimate, std_error, ci_lower, ci_upper, p_value, post_null_prob;
    std::optional<bool> selected;
};
struct SweepRow {
    std::string grid_var;
    double grid_value = 0;
    std::string method;
    std::string dim;  // "1".."d" or "all" for the joint row
    std::string term;
    std::optional<double> sel_freq, success_rate;
};
struct BoxplotRow {
    std::string method;
    int dim = 0;
    std::string term;
    int replicate = 0;
    std::optional<double> estimate;
    std::optional<bool> selected;
};

std::vector<CoefficientRow> read_coefficients_csv(std::istream& is);
std::vector<SweepRow> read_sweep_csv(std::istream& is);
std::vector<BoxplotRow> read_boxplot_csv(std::istream& is);

/// Writes the resolved config plus coefficients.csv (single run) or
/// sweep.csv + boxplot.csv (sweeps) into cfg.out_dir.
void emit_single(const ExperimentConfig& cfg, const SingleRunResult& result, bool svg = false);
void emit_sweep(const ExperimentConfig& cfg, const SweepSummary& summary, bool svg = false);

// SVG renderers used by the plot subcommand; highlight_terms are drawn green.
void write_sweep_svg(const std::vector<SweepRow>& rows, const std::string& method,
                     const std::string& dim, const std::vector<std::string>& highlight_terms,
                     std::ostream& os);
void write_coefficients_svg(const std::vector<CoefficientRow>& rows, const std::string& method,
                            int dim, std::ostream& os);
void write_boxplot_svg(const std::vector<BoxplotRow>& rows, const std::string& method, int dim,
                       const std::vector<std::string>& highlight_terms, std::ostream& os);

}  // namespace odeinf
