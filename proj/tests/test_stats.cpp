#include <doctest.h>

#include "odeinf/stats.hpp"

#include <cmath>
#include <random>

using namespace odeinf;

TEST_CASE("normal CDF reference values") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-10));
    CHECK(normal_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-8));
    CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the CDF") {
    for (double p : {0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
}

TEST_CASE("Student-t p-values: reference values and normal limit") {
    // t=2.0, dof=10: two-sided p = 0.07338... (standard table value).
    CHECK(student_t_two_sided_p(2.0, 10) == doctest::Approx(0.07338803).epsilon(1e-5));
    // dof=1 is Cauchy: P(|T| > 1) = 0.5.
    CHECK(student_t_two_sided_p(1.0, 1) == doctest::Approx(0.5).epsilon(1e-8));
    // Large dof approaches the normal tail.
    double z_p = 2.0 * (1.0 - normal_cdf(1.7));
    CHECK(student_t_two_sided_p(1.7, 100000) == doctest::Approx(z_p).epsilon(1e-3));
    CHECK(student_t_two_sided_p(0.0, 5) == doctest::Approx(1.0));
}

TEST_CASE("Student-t quantile inverts the two-sided p-value") {
    for (int dof : {3, 10, 30}) {
        double q = student_t_quantile(0.975, dof);
        CHECK(student_t_two_sided_p(q, dof) == doctest::Approx(0.05).epsilon(1e-7));
    }
    // dof=10, 97.5%: 2.228138... (standard table value).
    CHECK(student_t_quantile(0.975, 10) == doctest::Approx(2.228138852).epsilon(1e-6));
}

TEST_CASE("KS statistic: exact small-sample value and null behavior") {
    // Single observation at 0: D = max(F(0), 1 - F(0)) = 0.5.
    CHECK(ks_statistic_normal({0.0}) == doctest::Approx(0.5).epsilon(1e-12));
    // A sample far in the tail has D near 1.
    CHECK(ks_statistic_normal({10.0, 11.0, 12.0}) > 0.99);

    // Standard-normal draws: D should be small and the p-value large.
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    std::vector<double> sample(2000);
    for (double& v : sample) v = gauss(rng);
    double d = ks_statistic_normal(sample);
    CHECK(d < 0.04);
    CHECK(ks_p_value(d, 2000) > 0.05);
    // A uniform sample is clearly not normal.
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double& v : sample) v = unif(rng);
    CHECK(ks_p_value(ks_statistic_normal(sample), 2000) < 1e-6);
}

TEST_CASE("KS p-value is monotone decreasing in the statistic") {
    double prev = 1.0;
    for (double d = 0.01; d < 0.2; d += 0.01) {
        double p = ks_p_value(d, 500);
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
}
