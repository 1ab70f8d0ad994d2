#include <doctest.h>

#include "odeinf/basis.hpp"
#include "odeinf/dynamics.hpp"
#include "odeinf/ensemble.hpp"
#include "odeinf/regression.hpp"

#include <random>

using namespace odeinf;

namespace {

struct VdpData {
    Eigen::MatrixXd theta;
    Eigen::VectorXd y;
};

VdpData vdp_dim2(double noise_sigma, std::uint64_t seed) {
    OdeSystemSpec spec = builtin_system("van_der_pol");
    Trajectory traj = rk4_integrate(spec, Eigen::Vector2d(1.0, 0.0), 0.0, 15.0, 0.05);
    VdpData d;
    d.theta = evaluate_library(traj.states, spec.basis).theta;
    d.y.resize(traj.times.size());
    for (Eigen::Index i = 0; i < traj.times.size(); ++i)
        d.y(i) = spec.rhs(traj.states.row(i).transpose())(1);
    if (noise_sigma > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise_sigma);
        for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y(i) += gauss(rng);
    }
    return d;
}

}  // namespace

TEST_CASE("q = 1 produces a single sample and 0/1 inclusion probabilities") {
    VdpData d = vdp_dim2(0.1, 1);
    EnsembleReport rep = esindy(d.theta, d.y, 1, 7);
    CHECK(rep.q == 1);
    CHECK(rep.coefficient_samples.rows() == 1);
    for (int j = 0; j < rep.inclusion_probability.size(); ++j) {
        double p = rep.inclusion_probability(j);
        CHECK((p == 0.0 || p == 1.0));
        CHECK((rep.coefficient_samples(0, j) != 0.0) == (p == 1.0));
    }
}

TEST_CASE("noiseless data: true terms are included in every bootstrap sample") {
    VdpData d = vdp_dim2(0.0, 0);
    OdeSystemSpec spec = builtin_system("van_der_pol");
    EnsembleReport rep = esindy(d.theta, d.y, 50, 3);
    for (int j = 0; j < spec.basis.size(); ++j) {
        if (spec.true_coefficients(j, 1) != 0.0) CHECK(rep.inclusion_probability(j) == 1.0);
    }
}

TEST_CASE("identical seeds give bit-identical ensembles") {
    VdpData d = vdp_dim2(0.2, 5);
    EnsembleReport a = esindy(d.theta, d.y, 40, 11);
    EnsembleReport b = esindy(d.theta, d.y, 40, 11);
    CHECK((a.coefficient_samples - b.coefficient_samples).cwiseAbs().maxCoeff() == 0.0);
    EnsembleReport c = esindy(d.theta, d.y, 40, 12);
    CHECK((a.coefficient_samples - c.coefficient_samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("serial and parallel execution produce the same samples") {
    VdpData d = vdp_dim2(0.2, 6);
    EnsembleReport serial = esindy(d.theta, d.y, 30, 9, nullptr, false);
    EnsembleReport parallel = esindy(d.theta, d.y, 30, 9, nullptr, true);
    CHECK((serial.coefficient_samples - parallel.coefficient_samples).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("aggregation: thresholding and mean/median statistics") {
    EnsembleReport rep;
    rep.q = 4;
    rep.coefficient_samples.resize(4, 2);
    rep.coefficient_samples << 1.0, 0.0, 2.0, 0.0, 3.0, 5.0, 4.0, 0.0;
    rep.inclusion_probability.resize(2);
    rep.inclusion_probability << 1.0, 0.25;

    Eigen::VectorXd mean_all = esindy_aggregate(rep, 0.0, AggregateStatistic::Mean);
    CHECK(mean_all(0) == doctest::Approx(2.5));
    CHECK(mean_all(1) == doctest::Approx(1.25));  // zeros included

    Eigen::VectorXd med = esindy_aggregate(rep, 0.0, AggregateStatistic::Median);
    CHECK(med(0) == doctest::Approx(2.5));
    CHECK(med(1) == doctest::Approx(0.0));

    Eigen::VectorXd thresh = esindy_aggregate(rep, 0.5, AggregateStatistic::Mean);
    CHECK(thresh(0) == doctest::Approx(2.5));
    CHECK(thresh(1) == 0.0);

    CHECK_THROWS_AS(esindy_aggregate(rep, 1.5, AggregateStatistic::Mean),
                    std::invalid_argument);
}

TEST_CASE("a custom fit function is applied to every bootstrap sample") {
    VdpData d = vdp_dim2(0.1, 8);
    auto constant_fit = [](const Eigen::MatrixXd& X, const Eigen::VectorXd&) {
        return Eigen::VectorXd(Eigen::VectorXd::Ones(X.cols()));
    };
    EnsembleReport rep = esindy(d.theta, d.y, 10, 2, constant_fit);
    CHECK((rep.coefficient_samples.array() == 1.0).all());
    CHECK((rep.inclusion_probability.array() == 1.0).all());
}

TEST_CASE("q must be positive") {
    VdpData d = vdp_dim2(0.1, 9);
    CHECK_THROWS_AS(esindy(d.theta, d.y, 0, 1), std::invalid_argument);
}
