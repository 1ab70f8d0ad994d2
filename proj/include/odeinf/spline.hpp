#pragma once

#include <Eigen/Dense>
#include <vector>

#include "odeinf/dynamics.hpp"

namespace odeinf {

/// Natural cubic smoothing spline minimizing
///   sum_i (y_i - f(t_i))^2 + lambda * int f''(t)^2 dt.
struct SmoothingSpline {
    Eigen::VectorXd knots;
    Eigen::VectorXd values;        // fitted values at the knots
    Eigen::VectorXd second_derivs; // f'' at the knots (natural: endpoints 0)
    double lambda = 0.0;
    double edf = 0.0;              // trace of the smoother matrix
    double gcv = 0.0;

    double evaluate(double t) const;
    double derivative(double t) const;
};

struct SmoothingOptions {
    bool use_gcv = true;
    double lambda = 0.0;      // used when use_gcv is false
    // Multiplier applied to the GCV-selected lambda before the final fit.
    // Values below 1 deliberately undersmooth: GCV targets function
    // estimation, and the extra flexibility turns the systematic (smooth,
    // feature-correlated) part of the derivative error into noise-like
    // variation that downstream variance estimates can absorb.
    double lambda_factor = 1.0;
};

SmoothingSpline fit_smoothing_spline(const Eigen::VectorXd& times, const Eigen::VectorXd& values,
                                     const SmoothingOptions& opt = {});

/// Per-component spline fits of a trajectory's columns.
std::vector<SmoothingSpline> fit_trajectory_splines(const Trajectory& traj,
                                                    const SmoothingOptions& opt = {});

Eigen::MatrixXd smoothed_states(const std::vector<SmoothingSpline>& splines,
                                const Eigen::VectorXd& times);

/// Analytic first derivative of each fitted spline at the given times.
Eigen::MatrixXd estimate_derivatives(const std::vector<SmoothingSpline>& splines,
                                     const Eigen::VectorXd& times);

/// Central second-order finite differences (one-sided at the ends); fallback
/// derivative estimator that needs no spline fit.
Eigen::MatrixXd finite_difference_derivatives(const Eigen::VectorXd& times,
                                              const Eigen::MatrixXd& states);

}  // namespace odeinf
