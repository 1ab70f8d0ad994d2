#include "odeinf/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace odeinf {

Trajectory rk4_integrate(const RhsFunction& rhs, const Eigen::VectorXd& x0,
                         double t0, double t1, double h) {
    if (h <= 0.0) throw std::invalid_argument("rk4_integrate: step size must be positive");
    if (t1 <= t0) throw std::invalid_argument("rk4_integrate: degenerate time span");
    const int n = std::max(1, static_cast<int>(std::lround((t1 - t0) / h)));
    const int d = static_cast<int>(x0.size());

    Trajectory traj;
    traj.times.resize(n + 1);
    traj.states.resize(n + 1, d);
    traj.times(0) = t0;
    traj.states.row(0) = x0.transpose();

    Eigen::VectorXd x = x0;
    double t = t0;
    for (int i = 0; i < n; ++i) {
        double hi = (i == n - 1) ? (t1 - t) : h;
        Eigen::VectorXd k1 = rhs(t, x);
        Eigen::VectorXd k2 = rhs(t + hi / 2, x + (hi / 2) * k1);
        Eigen::VectorXd k3 = rhs(t + hi / 2, x + (hi / 2) * k2);
        Eigen::VectorXd k4 = rhs(t + hi, x + hi * k3);
        x += (hi / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        t = (i == n - 1) ? t1 : t0 + (i + 1) * h;
        if (!x.allFinite())
            throw DivergenceError("rk4_integrate: non-finite state at step " + std::to_string(i + 1), i + 1);
        traj.times(i + 1) = t;
        traj.states.row(i + 1) = x.transpose();
    }
    return traj;
}

Trajectory rk4_integrate(const OdeSystemSpec& spec, const Eigen::VectorXd& x0,
                         double t0, double t1, double h) {
    if (x0.size() != spec.dimension)
        throw std::invalid_argument("rk4_integrate: initial condition dimension mismatch");
    return rk4_integrate([&spec](double, const Eigen::VectorXd& x) { return spec.rhs(x); },
                         x0, t0, t1, h);
}

OdeSystemSpec builtin_system(const std::string& name, const SystemParams& p, int max_degree) {
    OdeSystemSpec spec;
    spec.name = name;
    spec.dimension = 2;
    spec.basis = build_basis(2, max_degree);
    spec.true_coefficients = Eigen::MatrixXd::Zero(spec.basis.size(), 2);

    auto set = [&spec](int dim, std::vector<int> expo, double value) {
        int j = spec.basis.index_of(expo);
        if (j < 0) throw std::invalid_argument("builtin_system: basis degree too low for system term");
        spec.true_coefficients(j, dim) = value;
    };

    if (name == "van_der_pol") {
        // x1' = x2;  x2' = -x1 + mu*(1 - x1^2)*x2
        set(0, {0, 1}, 1.0);
        set(1, {1, 0}, -1.0);
        set(1, {0, 1}, p.mu);
        set(1, {2, 1}, -p.mu);
    } else if (name == "spiral") {
        // x1' = -alpha*x1 + beta*x2;  x2' = -alpha*x2 - beta*x1
        set(0, {1, 0}, -p.alpha);
        set(0, {0, 1}, p.beta);
        set(1, {0, 1}, -p.alpha);
        set(1, {1, 0}, -p.beta);
    } else if (name == "lotka_volterra") {
        // x1' = alpha*x1 - beta*x1*x2;  x2' = delta*x1*x2 - gamma*x2
        set(0, {1, 0}, p.alpha);
        set(0, {1, 1}, -p.beta);
        set(1, {0, 1}, -p.gamma);
        set(1, {1, 1}, p.delta);
    } else {
        throw std::invalid_argument("builtin_system: unknown system '" + name + "'");
    }
    return spec;
}

Trajectory add_noise(const Trajectory& traj, const NoiseConfig& cfg) {
    if (cfg.sigma_scale < 0.0) throw std::invalid_argument("add_noise: sigma_scale must be >= 0");
    Trajectory out = traj;
    if (cfg.sigma_scale == 0.0) return out;
    double sd = cfg.sigma_scale;
    if (cfg.mode == NoiseConfig::Mode::MaxScaled)
        sd *= traj.states.cwiseAbs().maxCoeff();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, sd);
    for (Eigen::Index i = 0; i < out.states.rows(); ++i)
        for (Eigen::Index j = 0; j < out.states.cols(); ++j)
            out.states(i, j) += normal(rng);
    return out;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (Eigen::Index j = 0; j < traj.states.cols(); ++j) os << ",x" << (j + 1);
    os << "\n";
    char buf[32];
    for (Eigen::Index i = 0; i < traj.times.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", traj.times(i));
        os << buf;
        for (Eigen::Index j = 0; j < traj.states.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", traj.states(i, j));
            os << "," << buf;
        }
        os << "\n";
    }
}

Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("read_trajectory_csv: empty input");
    int d = 0;
    for (char c : line)
        if (c == ',') ++d;
    if (d < 1) throw std::invalid_argument("read_trajectory_csv: expected header t,x1,...");
    std::vector<double> times;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        int col = 0;
        while (std::getline(row, cell, ',')) {
            double v = std::stod(cell);
            if (col == 0)
                times.push_back(v);
            else
                values.push_back(v);
            ++col;
        }
        if (col != d + 1) throw std::invalid_argument("read_trajectory_csv: ragged row");
    }
    Trajectory traj;
    traj.times = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    traj.states.resize(static_cast<Eigen::Index>(times.size()), d);
    for (size_t i = 0; i < times.size(); ++i)
        for (int j = 0; j < d; ++j) traj.states(static_cast<Eigen::Index>(i), j) = values[i * d + j];
    return traj;
}

}  // namespace odeinf
