#include <doctest.h>

#include "odeinf/spline.hpp"

#include <cmath>
#include <random>

using namespace odeinf;

namespace {

Eigen::VectorXd linspace(double a, double b, int n) {
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) t(i) = a + (b - a) * i / (n - 1);
    return t;
}

}  // namespace

TEST_CASE("linear data is reproduced exactly at any lambda") {
    Eigen::VectorXd t = linspace(0, 5, 30);
    Eigen::VectorXd y = 2.0 * t.array() - 1.0;
    for (double lambda : {1e-6, 1.0, 1e6}) {
        SmoothingOptions opt;
        opt.use_gcv = false;
        opt.lambda = lambda;
        SmoothingSpline s = fit_smoothing_spline(t, y, opt);
        CHECK((s.values - y).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(s.second_derivs.cwiseAbs().maxCoeff() < 1e-8);
        CHECK(s.derivative(2.3) == doctest::Approx(2.0).epsilon(1e-7));
    }
}

TEST_CASE("lambda -> infinity approaches the least-squares line") {
    Eigen::VectorXd t = linspace(0, 1, 25);
    Eigen::VectorXd y(25);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 0.2);
    for (int i = 0; i < 25; ++i) y(i) = 3.0 * t(i) + 0.5 + gauss(rng);
    SmoothingOptions opt;
    opt.use_gcv = false;
    opt.lambda = 1e10;
    SmoothingSpline s = fit_smoothing_spline(t, y, opt);
    // Least-squares line via normal equations.
    Eigen::MatrixXd X(25, 2);
    X.col(0).setOnes();
    X.col(1) = t;
    Eigen::VectorXd ab = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    Eigen::VectorXd line = X * ab;
    CHECK((s.values - line).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(s.edf == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("near-interpolation at tiny lambda") {
    Eigen::VectorXd t = linspace(0, 1, 15);
    Eigen::VectorXd y = (6.0 * t.array()).sin();
    SmoothingOptions opt;
    opt.use_gcv = false;
    opt.lambda = 1e-12;
    SmoothingSpline s = fit_smoothing_spline(t, y, opt);
    CHECK((s.values - y).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(s.edf == doctest::Approx(15.0).epsilon(1e-2));
}

TEST_CASE("fit is linear in the data at fixed lambda") {
    Eigen::VectorXd t = linspace(0, 2, 20);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd y1(20), y2(20);
    for (int i = 0; i < 20; ++i) {
        y1(i) = gauss(rng);
        y2(i) = gauss(rng);
    }
    SmoothingOptions opt;
    opt.use_gcv = false;
    opt.lambda = 0.01;
    SmoothingSpline a = fit_smoothing_spline(t, y1, opt);
    SmoothingSpline b = fit_smoothing_spline(t, y2, opt);
    SmoothingSpline c = fit_smoothing_spline(t, 2.0 * y1 + 3.0 * y2, opt);
    CHECK((c.values - 2.0 * a.values - 3.0 * b.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("GCV denoises a sine wave close to the truth") {
    const int n = 200;
    Eigen::VectorXd t = linspace(0, 10, n);
    Eigen::VectorXd truth = t.array().sin();
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 0.1);
    Eigen::VectorXd y = truth;
    for (int i = 0; i < n; ++i) y(i) += gauss(rng);
    SmoothingSpline s = fit_smoothing_spline(t, y);
    double rmse_fit = std::sqrt((s.values - truth).squaredNorm() / n);
    double rmse_raw = std::sqrt((y - truth).squaredNorm() / n);
    CHECK(rmse_fit < 0.5 * rmse_raw);  // substantial variance reduction
    CHECK(rmse_fit < 0.05);
    // The derivative should track cos(t) away from the boundary.
    double max_err = 0.0;
    for (int i = 20; i < n - 20; ++i)
        max_err = std::max(max_err, std::abs(s.derivative(t(i)) - std::cos(t(i))));
    CHECK(max_err < 0.15);
}

TEST_CASE("derivative of a fitted parabola matches 2t") {
    const int n = 60;
    Eigen::VectorXd t = linspace(0, 3, n);
    Eigen::VectorXd y = t.array().square();
    SmoothingOptions opt;
    opt.use_gcv = false;
    opt.lambda = 1e-10;
    SmoothingSpline s = fit_smoothing_spline(t, y, opt);
    for (double tt : {0.5, 1.0, 1.7, 2.5})
        CHECK(s.derivative(tt) == doctest::Approx(2.0 * tt).epsilon(1e-3));
}

TEST_CASE("input validation: short series, non-increasing knots, extrapolation") {
    Eigen::VectorXd t3 = linspace(0, 1, 3), y3 = t3;
    CHECK_THROWS_AS(fit_smoothing_spline(t3, y3), std::invalid_argument);
    Eigen::VectorXd bad(5), yb(5);
    bad << 0, 1, 1, 2, 3;
    yb.setZero();
    CHECK_THROWS_AS(fit_smoothing_spline(bad, yb), std::invalid_argument);

    Eigen::VectorXd t = linspace(0, 1, 10);
    SmoothingSpline s = fit_smoothing_spline(t, t);
    CHECK_THROWS_AS(s.evaluate(-0.5), std::invalid_argument);
    CHECK_THROWS_AS(s.derivative(1.5), std::invalid_argument);
}

TEST_CASE("finite differences are exact on quadratics, including the ends") {
    Eigen::VectorXd t(6);
    t << 0.0, 0.2, 0.5, 0.9, 1.4, 2.0;  // nonuniform
    Eigen::MatrixXd x(6, 1);
    for (int i = 0; i < 6; ++i) x(i, 0) = 3.0 * t(i) * t(i) - t(i) + 2.0;
    Eigen::MatrixXd d = finite_difference_derivatives(t, x);
    for (int i = 0; i < 6; ++i)
        CHECK(d(i, 0) == doctest::Approx(6.0 * t(i) - 1.0).epsilon(1e-9));
}

TEST_CASE("trajectory splines and derivative estimates per component") {
    Trajectory traj;
    traj.times = linspace(0, 6, 120);
    traj.states.resize(120, 2);
    traj.states.col(0) = traj.times.array().sin();
    traj.states.col(1) = traj.times.array().cos();
    auto splines = fit_trajectory_splines(traj);
    REQUIRE(splines.size() == 2);
    Eigen::MatrixXd sm = smoothed_states(splines, traj.times);
    CHECK((sm - traj.states).cwiseAbs().maxCoeff() < 1e-2);
    Eigen::MatrixXd d = estimate_derivatives(splines, traj.times);
    double err = 0.0;
    for (int i = 10; i < 110; ++i) {
        err = std::max(err, std::abs(d(i, 0) - std::cos(traj.times(i))));
        err = std::max(err, std::abs(d(i, 1) + std::sin(traj.times(i))));
    }
    CHECK(err < 0.05);
}
