// Timing comparison of the OpenMP bootstrap/replicate kernels against the
// serial reference paths. Run from the build directory: ./bench_parallel
#include "odeinf/basis.hpp"
#include "odeinf/dynamics.hpp"
#include "odeinf/ensemble.hpp"
#include "odeinf/harness.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>

using namespace odeinf;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());

    // Bootstrap ensemble kernel.
    OdeSystemSpec spec = builtin_system("van_der_pol");
    Trajectory traj = rk4_integrate(spec, Eigen::Vector2d(1.0, 0.0), 0.0, 15.0, 0.05);
    NoiseConfig noise{0.1, NoiseConfig::Mode::MaxScaled, 7};
    Trajectory noisy = add_noise(traj, noise);
    MonomialBasis basis = build_basis(2, 4);
    Eigen::MatrixXd theta = evaluate_library(noisy.states, basis).theta;
    Eigen::VectorXd y(noisy.times.size());
    for (Eigen::Index i = 0; i < noisy.times.size(); ++i)
        y(i) = spec.rhs(noisy.states.row(i).transpose())(1);

    const int q = 200;
    auto t0 = std::chrono::steady_clock::now();
    EnsembleReport serial = esindy(theta, y, q, 11, nullptr, false);
    auto t1 = std::chrono::steady_clock::now();
    EnsembleReport parallel = esindy(theta, y, q, 11, nullptr, true);
    auto t2 = std::chrono::steady_clock::now();
    double max_diff =
        (serial.coefficient_samples - parallel.coefficient_samples).cwiseAbs().maxCoeff();
    std::printf("bootstrap ensemble (q=%d):  serial %.3fs  parallel %.3fs  speedup %.2fx  "
                "max |diff| %.3g\n",
                q, seconds(t0, t1), seconds(t1, t2), seconds(t0, t1) / seconds(t1, t2), max_diff);

    // Replicate sweep kernel.
    ExperimentConfig cfg;
    cfg.system = "van_der_pol";
    cfg.methods = {Method::Lasso, Method::DebiasedLasso};
    cfg.replicates = 16;
    cfg.noise_grid = {0.05};
    cfg.seed = 3;
    cfg.parallel = false;
    t0 = std::chrono::steady_clock::now();
    SweepSummary s_serial = sweep(cfg);
    t1 = std::chrono::steady_clock::now();
    cfg.parallel = true;
    SweepSummary s_parallel = sweep(cfg);
    t2 = std::chrono::steady_clock::now();
    double sweep_diff = 0.0;
    for (size_t g = 0; g < s_serial.selections.size(); ++g)
        for (size_t m = 0; m < s_serial.selections[g].size(); ++m)
            for (size_t d = 0; d < s_serial.selections[g][m].size(); ++d)
                sweep_diff = std::max(sweep_diff, (s_serial.estimates[g][m][d] -
                                                   s_parallel.estimates[g][m][d])
                                                      .cwiseAbs()
                                                      .maxCoeff());
    std::printf("replicate sweep (R=%d):     serial %.3fs  parallel %.3fs  speedup %.2fx  "
                "max |diff| %.3g\n",
                cfg.replicates, seconds(t0, t1), seconds(t1, t2),
                seconds(t0, t1) / seconds(t1, t2), sweep_diff);
    return 0;
}
