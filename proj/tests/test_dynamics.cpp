#include <doctest.h>

#include "odeinf/dynamics.hpp"

#include <cmath>
#include <sstream>

using namespace odeinf;

namespace {

// Scalar linear test problem x' = -x with known solution x(t) = e^{-t}.
RhsFunction decay = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };

double endpoint_error(double h) {
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    Trajectory t = rk4_integrate(decay, x0, 0.0, 1.0, h);
    return std::abs(t.states(t.states.rows() - 1, 0) - std::exp(-1.0));
}

}  // namespace

TEST_CASE("fourth-order convergence: halving h shrinks the error ~16x") {
    double e1 = endpoint_error(0.1);
    double e2 = endpoint_error(0.05);
    double ratio = e1 / e2;
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("trajectory includes the initial state and hits t_end exactly") {
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    Trajectory t = rk4_integrate(decay, x0, 0.0, 1.0, 0.3);  // non-multiple step
    CHECK(t.times(0) == 0.0);
    CHECK(t.states(0, 0) == 1.0);
    CHECK(t.times(t.times.size() - 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("divergence raises an error carrying the step index") {
    RhsFunction blowup = [](double, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(x.array().square().matrix());
    };
    Eigen::VectorXd x0(1);
    x0 << 10.0;
    CHECK_THROWS_AS(rk4_integrate(blowup, x0, 0.0, 10.0, 0.1), DivergenceError);
    try {
        rk4_integrate(blowup, x0, 0.0, 10.0, 0.1);
    } catch (const DivergenceError& e) {
        CHECK(e.step_index >= 0);
    }
}

TEST_CASE("van der Pol coefficient matrix encodes the two equations") {
    SystemParams params;
    params.mu = 2.0;
    OdeSystemSpec spec = builtin_system("van_der_pol", params);
    const MonomialBasis& b = spec.basis;
    // dim 1: x1' = x2
    Eigen::VectorXd c1 = spec.true_coefficients.col(0);
    CHECK(c1(b.index_of({0, 1})) == doctest::Approx(1.0));
    CHECK((c1.cwiseAbs().sum() - 1.0) == doctest::Approx(0.0));
    // dim 2: x2' = -x1 + 2 x2 - 2 x1^2 x2
    Eigen::VectorXd c2 = spec.true_coefficients.col(1);
    CHECK(c2(b.index_of({1, 0})) == doctest::Approx(-1.0));
    CHECK(c2(b.index_of({0, 1})) == doctest::Approx(2.0));
    CHECK(c2(b.index_of({2, 1})) == doctest::Approx(-2.0));
    CHECK((c2.cwiseAbs().sum() - 5.0) == doctest::Approx(0.0));
}

TEST_CASE("spiral coefficient matrix: linear rotation with decay") {
    OdeSystemSpec spec = builtin_system("spiral");
    const MonomialBasis& b = spec.basis;
    Eigen::VectorXd c1 = spec.true_coefficients.col(0);
    Eigen::VectorXd c2 = spec.true_coefficients.col(1);
    CHECK(c1(b.index_of({1, 0})) == doctest::Approx(-1.0 / 3.0));
    CHECK(c1(b.index_of({0, 1})) == doctest::Approx(3.0));
    CHECK(c2(b.index_of({1, 0})) == doctest::Approx(-3.0));
    CHECK(c2(b.index_of({0, 1})) == doctest::Approx(-1.0 / 3.0));
    CHECK((c1.cwiseAbs().sum() + c2.cwiseAbs().sum()) ==
          doctest::Approx(2 * (3.0 + 1.0 / 3.0)));
}

TEST_CASE("spiral trajectory decays toward the origin") {
    OdeSystemSpec spec = builtin_system("spiral");
    Trajectory t = rk4_integrate(spec, Eigen::Vector2d(2.0, 0.0), 0.0, 20.0, 0.05);
    double r0 = t.states.row(0).norm();
    double r1 = t.states.row(t.states.rows() - 1).norm();
    CHECK(r1 < 0.05 * r0);
    // Closed form: x1 = 2 e^{-t/3} cos(3t), x2 = -2 e^{-t/3} sin(3t).
    Eigen::Index mid = t.times.size() / 2;
    double tm = t.times(mid);
    CHECK(t.states(mid, 0) ==
          doctest::Approx(2.0 * std::exp(-tm / 3.0) * std::cos(3.0 * tm)).epsilon(1e-4));
    CHECK(t.states(mid, 1) ==
          doctest::Approx(-2.0 * std::exp(-tm / 3.0) * std::sin(3.0 * tm)).epsilon(1e-4));
}

TEST_CASE("rhs from the coefficient matrix matches the handwritten system") {
    SystemParams params;
    params.mu = 2.0;
    OdeSystemSpec spec = builtin_system("van_der_pol", params);
    Eigen::VectorXd x(2);
    x << 0.7, -1.2;
    Eigen::VectorXd f = spec.rhs(x);
    CHECK(f(0) == doctest::Approx(x(1)).epsilon(1e-14));
    CHECK(f(1) ==
          doctest::Approx(-x(0) + 2.0 * x(1) - 2.0 * x(0) * x(0) * x(1)).epsilon(1e-14));
}

TEST_CASE("unknown system name throws") {
    CHECK_THROWS_AS(builtin_system("rossler"), std::invalid_argument);
}

TEST_CASE("noise is deterministic given the seed and scales as configured") {
    OdeSystemSpec spec = builtin_system("van_der_pol");
    Trajectory t = rk4_integrate(spec, Eigen::Vector2d(1.0, 0.0), 0.0, 15.0, 0.05);

    NoiseConfig cfg{0.1, NoiseConfig::Mode::Absolute, 99};
    Trajectory a = add_noise(t, cfg);
    Trajectory b = add_noise(t, cfg);
    CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);

    cfg.seed = 100;
    Trajectory c = add_noise(t, cfg);
    CHECK((a.states - c.states).cwiseAbs().maxCoeff() > 0.0);

    // Absolute mode: empirical noise sd near 0.1 over ~600 samples.
    double sd = std::sqrt((a.states - t.states).array().square().mean());
    CHECK(sd == doctest::Approx(0.1).epsilon(0.15));

    // Max-scaled mode multiplies by the trajectory's max absolute entry.
    NoiseConfig ms{0.1, NoiseConfig::Mode::MaxScaled, 99};
    Trajectory m = add_noise(t, ms);
    double scale = t.states.cwiseAbs().maxCoeff();
    double sd_ms = std::sqrt((m.states - t.states).array().square().mean());
    CHECK(sd_ms == doctest::Approx(0.1 * scale).epsilon(0.15));

    // Zero noise is the identity.
    NoiseConfig zero{0.0, NoiseConfig::Mode::Absolute, 1};
    Trajectory z = add_noise(t, zero);
    CHECK((z.states - t.states).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trajectory CSV round trip preserves full precision") {
    OdeSystemSpec spec = builtin_system("van_der_pol");
    Trajectory t = rk4_integrate(spec, Eigen::Vector2d(1.0, 0.0), 0.0, 2.0, 0.05);
    std::ostringstream os;
    write_trajectory_csv(t, os);
    CHECK(os.str().rfind("t,x1,x2\n", 0) == 0);
    std::istringstream is(os.str());
    Trajectory back = read_trajectory_csv(is);
    REQUIRE(back.times.size() == t.times.size());
    CHECK((back.times - t.times).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.states - t.states).cwiseAbs().maxCoeff() == 0.0);
}
