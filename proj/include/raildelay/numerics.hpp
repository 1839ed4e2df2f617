#pragma once

#include <Eigen/Core>
#include <functional>

namespace raildelay::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Exp(u * m). Order 2 goes through the trace-shifted closed form; larger
// orders use scaling-and-squaring with a degree-13 Pade approximant. For an
// intensity matrix (rows summing to zero, nonnegative off-diagonals) the
// result is row-stochastic.
Matrix matrix_exponential(const Matrix& m, double u);

// d/de Exp(a + e*v) at e=0, via the exponential of the block matrix
// [[a, v], [0, a]].
Matrix expm_frechet(const Matrix& a, const Matrix& v);

namespace detail {
// The two routes individually, exposed so they can be tested against each
// other. Both compute Exp(a) of an already-scaled argument.
Matrix expm_closed_2x2(const Matrix& a);
Matrix expm_pade(const Matrix& a);
} // namespace detail

using ObjectiveFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

struct OptimResult {
    Vector argmax;
    double value = 0.0;
    // Hessian of the NEGATIVE objective at argmax (the observed information
    // when the objective is a log-likelihood), symmetrized.
    Matrix hessian;
    bool converged = false;
    int iterations = 0;
};

struct OptimOptions {
    double tol = 1e-8;        // gradient infinity-norm at the maximum
    int max_iterations = 500;
    double hessian_step = 1e-5; // scaled per component by (1 + |theta|)
    bool want_hessian = true;
};

// BFGS ascent with backtracking line search. The variant without a gradient
// falls back to central finite differences. Throws std::invalid_argument if
// the objective is not finite at init; failure to converge is reported via
// converged=false, never silently.
OptimResult maximize(const ObjectiveFn& f, const Vector& init, const OptimOptions& opts = {});
OptimResult maximize(const ObjectiveFn& f, const GradientFn& grad, const Vector& init,
                     const OptimOptions& opts = {});

// Central differences, componentwise, with per-component step
// step * (1 + |x_i|).
Vector finite_diff_gradient(const ObjectiveFn& f, const Vector& point, double step);

// Central differences of an analytic gradient; symmetrized.
Matrix finite_diff_hessian(const GradientFn& grad, const Vector& point, double step);

} // namespace raildelay::numerics
