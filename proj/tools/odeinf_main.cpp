#include <CLI11.hpp>

#include "odeinf/dynamics.hpp"
#include "odeinf/harness.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace {

using namespace odeinf;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kRuntimeFailure = 2;

struct CliFlags {
    std::string system;
    std::optional<double> mu, alpha_sys, beta_sys, t_end, step, noise, alpha;
    std::optional<int> n, degree, replicates;
    std::optional<std::uint64_t> seed;
    std::string noise_mode, methods_csv, out, config, derivative_source, data;
    std::vector<double> noise_grid;
    std::vector<int> n_grid;
    bool svg = false;
    bool serial = false;
};

void add_common_flags(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--system", f.system, "van_der_pol, spiral, or lotka_volterra");
    cmd->add_option("--mu", f.mu, "van der Pol damping parameter");
    cmd->add_option("--alpha-sys", f.alpha_sys, "spiral decay rate");
    cmd->add_option("--beta-sys", f.beta_sys, "spiral rotation rate");
    cmd->add_option("--t-end", f.t_end, "integration end time");
    cmd->add_option("--step", f.step, "integration step size");
    cmd->add_option("--n", f.n, "number of steps (overrides --step)");
    cmd->add_option("--noise", f.noise, "noise standard deviation (or scale)");
    cmd->add_option("--noise-mode", f.noise_mode, "absolute or max_scaled");
    cmd->add_option("--seed", f.seed, "RNG seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--config", f.config, "JSON config file (CLI flags override it)");
}

void apply_flags(ExperimentConfig& cfg, const CliFlags& f) {
    if (!f.config.empty()) {
        std::ifstream is(f.config);
        if (!is) throw std::invalid_argument("cannot read config file: " + f.config);
        std::stringstream ss;
        ss << is.rdbuf();
        config_merge_json(cfg, ss.str());
    }
    if (!f.system.empty()) cfg.system = f.system;
    if (f.mu) cfg.params.mu = *f.mu;
    if (f.alpha_sys) cfg.params.alpha = *f.alpha_sys;
    if (f.beta_sys) cfg.params.beta = *f.beta_sys;
    if (f.t_end) cfg.t_end = *f.t_end;
    if (f.step) cfg.step = *f.step;
    if (f.n) cfg.n = *f.n;
    if (f.noise) cfg.noise_sigma = *f.noise;
    if (!f.noise_mode.empty()) {
        if (f.noise_mode == "absolute")
            cfg.noise_mode = NoiseConfig::Mode::Absolute;
        else if (f.noise_mode == "max_scaled")
            cfg.noise_mode = NoiseConfig::Mode::MaxScaled;
        else
            throw std::invalid_argument("--noise-mode must be absolute or max_scaled");
    }
    if (!f.derivative_source.empty()) {
        if (f.derivative_source == "spline")
            cfg.derivative_source = DerivativeSource::Spline;
        else if (f.derivative_source == "finite_difference")
            cfg.derivative_source = DerivativeSource::FiniteDifference;
        else if (f.derivative_source == "exact")
            cfg.derivative_source = DerivativeSource::Exact;
        else
            throw std::invalid_argument(
                "--derivatives must be spline, finite_difference, or exact");
    }
    if (f.degree) cfg.degree = *f.degree;
    if (!f.methods_csv.empty()) {
        cfg.methods.clear();
        std::stringstream ss(f.methods_csv);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.methods.push_back(method_from_name(item));
    }
    if (f.replicates) cfg.replicates = *f.replicates;
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.seed) cfg.seed = *f.seed;
    if (!f.noise_grid.empty()) cfg.noise_grid = f.noise_grid;
    if (!f.n_grid.empty()) cfg.n_grid = f.n_grid;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.serial) cfg.parallel = false;
}

int cmd_simulate(const CliFlags& f) {
    ExperimentConfig cfg;
    apply_flags(cfg, f);
    cfg.validate();
    OdeSystemSpec spec = builtin_system(cfg.system, cfg.params, cfg.degree);
    Trajectory clean = rk4_integrate(spec, cfg.resolved_x0(), cfg.t0, cfg.t_end,
                                     cfg.resolved_step());
    NoiseConfig noise{cfg.noise_sigma, cfg.noise_mode, cfg.seed};
    Trajectory noisy = add_noise(clean, noise);
    std::filesystem::create_directories(cfg.out_dir);
    std::filesystem::path dir(cfg.out_dir);
    {
        std::ofstream os(dir / "trajectory.csv");
        if (!os) throw std::runtime_error("cannot write to " + cfg.out_dir);
        write_trajectory_csv(noisy, os);
    }
    {
        std::ofstream os(dir / "trajectory_clean.csv");
        write_trajectory_csv(clean, os);
    }
    {
        std::ofstream os(dir / "config.json");
        os << config_to_json(cfg);
    }
    std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << noisy.times.size()
              << " rows)\n";
    return kOk;
}

int cmd_fit(const CliFlags& f) {
    ExperimentConfig cfg;
    apply_flags(cfg, f);
    cfg.validate();
    SingleRunResult result;
    if (!f.data.empty()) {
        std::ifstream is(f.data);
        if (!is) throw std::invalid_argument("cannot read data file: " + f.data);
        Trajectory traj = read_trajectory_csv(is);
        result = run_single_on_trajectory(cfg, traj);
    } else {
        result = run_single(cfg, cfg.seed);
    }
    emit_single(cfg, result, f.svg);
    int failed = 0;
    for (const auto& cell : result.cells) {
        if (!cell.ok()) {
            ++failed;
            std::cerr << "warning: " << method_name(cell.method) << " dim " << cell.dim
                      << " failed: " << cell.error << "\n";
        }
    }
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "coefficients.csv").string()
              << "\n";
    if (failed == static_cast<int>(result.cells.size()))
        throw std::runtime_error("every method/dimension cell failed");
    return kOk;
}

int cmd_sweep(const CliFlags& f) {
    ExperimentConfig cfg;
    apply_flags(cfg, f);
    if (cfg.noise_grid.empty() && cfg.n_grid.empty())
        throw std::invalid_argument("sweep needs --noise-grid or --n-grid");
    cfg.validate();
    SweepSummary summary = sweep(cfg);
    emit_sweep(cfg, summary, f.svg);
    std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "sweep.csv").string() << " and "
              << (std::filesystem::path(cfg.out_dir) / "boxplot.csv").string() << "\n";
    return kOk;
}

int cmd_plot(const std::string& input, const std::string& out_dir) {
    std::ifstream is(input);
    if (!is) throw std::invalid_argument("cannot read " + input);
    std::string header;
    std::getline(is, header);
    is.seekg(0);
    std::filesystem::create_directories(out_dir);
    std::filesystem::path dir(out_dir);
    int written = 0;
    if (header.rfind("method,", 0) == 0) {
        auto rows = read_coefficients_csv(is);
        std::set<std::pair<std::string, int>> cells;
        for (const auto& r : rows) cells.insert({r.method, r.dim});
        for (const auto& [method, dim] : cells) {
            std::ofstream os(dir /
                             ("coefficients_" + method + "_dim" + std::to_string(dim) + ".svg"));
            write_coefficients_svg(rows, method, dim, os);
            ++written;
        }
    } else if (header.rfind("grid_var,", 0) == 0 && header.find("replicate") != std::string::npos) {
        auto rows = read_boxplot_csv(is);
        std::set<std::pair<std::string, int>> cells;
        for (const auto& r : rows) cells.insert({r.method, r.dim});
        for (const auto& [method, dim] : cells) {
            std::ofstream os(dir / ("boxplot_" + method + "_dim" + std::to_string(dim) + ".svg"));
            write_boxplot_svg(rows, method, dim, {}, os);
            ++written;
        }
    } else if (header.rfind("grid_var,", 0) == 0) {
        auto rows = read_sweep_csv(is);
        std::set<std::pair<std::string, std::string>> cells;
        for (const auto& r : rows)
            if (r.dim != "all") cells.insert({r.method, r.dim});
        for (const auto& [method, dim] : cells) {
            std::ofstream os(dir / ("sweep_" + method + "_dim" + dim + ".svg"));
            write_sweep_svg(rows, method, dim, {}, os);
            ++written;
        }
    } else {
        throw std::invalid_argument("unrecognized CSV header in " + input);
    }
    std::cout << "wrote " << written << " SVG file(s) to " << out_dir << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse ODE recovery with selection inference"};
    app.require_subcommand(1);

    CliFlags sim_f, fit_f, sweep_f;
    std::string plot_input, plot_out = ".";

    auto* sim = app.add_subcommand("simulate", "integrate a builtin system and write a noisy CSV");
    add_common_flags(sim, sim_f);

    auto* fit = app.add_subcommand("fit", "recover an ODE from a trajectory");
    add_common_flags(fit, fit_f);
    fit->add_option("--data", fit_f.data, "trajectory CSV (default: simulate internally)");
    fit->add_option("--degree", fit_f.degree, "library polynomial degree");
    fit->add_option("--methods", fit_f.methods_csv,
                    "comma list: lasso,debiased_lasso,bc_ridge,semms,esindy,stls");
    fit->add_option("--alpha", fit_f.alpha, "significance level");
    fit->add_option("--derivatives", fit_f.derivative_source,
                    "spline, finite_difference, or exact");
    fit->add_flag("--svg", fit_f.svg, "also render SVG plots");
    fit->add_flag("--serial", fit_f.serial, "disable OpenMP parallelism");

    auto* sw = app.add_subcommand("sweep", "replicate study over a noise or sample-size grid");
    add_common_flags(sw, sweep_f);
    sw->add_option("--degree", sweep_f.degree, "library polynomial degree");
    sw->add_option("--methods", sweep_f.methods_csv,
                   "comma list: lasso,debiased_lasso,bc_ridge,semms,esindy,stls");
    sw->add_option("--alpha", sweep_f.alpha, "significance level");
    sw->add_option("--replicates", sweep_f.replicates, "replicates per grid point");
    sw->add_option("--noise-grid", sweep_f.noise_grid, "noise levels to sweep");
    sw->add_option("--n-grid", sweep_f.n_grid, "sample sizes to sweep");
    sw->add_option("--derivatives", sweep_f.derivative_source,
                   "spline, finite_difference, or exact");
    sw->add_flag("--svg", sweep_f.svg, "also render SVG plots");
    sw->add_flag("--serial", sweep_f.serial, "disable OpenMP parallelism");

    auto* plot = app.add_subcommand("plot", "render SVG plots from an output CSV");
    plot->add_option("input", plot_input, "coefficients.csv, sweep.csv, or boxplot.csv")
        ->required();
    plot->add_option("--out", plot_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_f);
        if (fit->parsed()) return cmd_fit(fit_f);
        if (sw->parsed()) return cmd_sweep(sweep_f);
        if (plot->parsed()) return cmd_plot(plot_input, plot_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kOk;
}
