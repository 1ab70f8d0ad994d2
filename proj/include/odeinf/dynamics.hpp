#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "odeinf/basis.hpp"

namespace odeinf {

/// Ground-truth system stored as a sparse coefficient matrix over a monomial
/// basis, so recovered supports can be compared exactly against the truth.
struct OdeSystemSpec {
    std::string name;
    int dimension = 0;
    MonomialBasis basis;
    Eigen::MatrixXd true_coefficients;  // basis.size() x dimension

    Eigen::VectorXd rhs(const Eigen::VectorXd& state) const {
        return true_coefficients.transpose() * evaluate_library_row(state, basis);
    }
};

struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;  // times.size() x d
};

struct NoiseConfig {
    enum class Mode { Absolute, MaxScaled };
    double sigma_scale = 0.0;
    Mode mode = Mode::MaxScaled;
    std::uint64_t seed = 0;
};

class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(const std::string& what, int step) : std::runtime_error(what), step_index(step) {}
    int step_index;
};

using RhsFunction = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

/// Classic fixed-step fourth-order Runge-Kutta. The returned trajectory
/// includes the initial state; n = round((t1-t0)/h) steps, the last one
/// shortened if (t1-t0) is not an exact multiple of h.
Trajectory rk4_integrate(const RhsFunction& rhs, const Eigen::VectorXd& x0,
                         double t0, double t1, double h);
Trajectory rk4_integrate(const OdeSystemSpec& spec, const Eigen::VectorXd& x0,
                         double t0, double t1, double h);

/// name in {van_der_pol, spiral, lotka_volterra}; the coefficient matrix is
/// built over the degree-max_degree monomial basis (default 4).
struct SystemParams {
    double mu = 2.0;                    // van_der_pol
    double alpha = 1.0 / 3.0, beta = 3.0;  // spiral
    double gamma = 1.0, delta = 1.0;       // lotka_volterra (alpha, beta shared)
};
OdeSystemSpec builtin_system(const std::string& name, const SystemParams& params = {},
                             int max_degree = 4);

Trajectory add_noise(const Trajectory& traj, const NoiseConfig& cfg);

/// CSV with header "t,x1,...,xd", full double precision.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
Trajectory read_trajectory_csv(std::istream& is);

}  // namespace odeinf
