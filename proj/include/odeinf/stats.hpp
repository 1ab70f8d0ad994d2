#pragma once

#include <vector>

namespace odeinf {

double normal_cdf(double x);

/// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1.2e-9).
double normal_quantile(double p);

/// Two-sided p-value from a Student-t statistic with dof degrees of freedom.
double student_t_two_sided_p(double t, int dof);

/// Quantile of the Student-t distribution (used for OLS confidence intervals).
double student_t_quantile(double p, int dof);

/// One-sample Kolmogorov-Smirnov statistic against the standard normal CDF.
double ks_statistic_normal(std::vector<double> sample);

/// Asymptotic Kolmogorov distribution p-value for statistic d at sample size n.
double ks_p_value(double d, int n);

}  // namespace odeinf
