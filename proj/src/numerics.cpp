#include "raildelay/numerics.hpp"

#include <Eigen/LU>
#include <cmath>
#include <stdexcept>

namespace raildelay::numerics {

namespace detail {

Matrix expm_closed_2x2(const Matrix& a) {
    // Exp(A) = e^mu (c(d) I + s(d) B) where mu is the mean eigenvalue,
    // B = A - mu I is trace-free, d = B(0,0)^2 + B(0,1)*B(1,0) = -det(B),
    // and (c, s) are cosh/sinhc for d > 0, cos/sinc for d < 0.
    const double mu = 0.5 * (a(0, 0) + a(1, 1));
    Matrix b = a;
    b(0, 0) -= mu;
    b(1, 1) -= mu;
    const double disc = b(0, 0) * b(0, 0) + b(0, 1) * b(1, 0);
    double c, s;
    const double ad = std::abs(disc);
    if (ad < 1e-12) {
        // Series in disc; the O(disc^2) terms are below double precision here.
        c = 1.0 + disc / 2.0;
        s = 1.0 + disc / 6.0;
    } else if (disc > 0) {
        const double d = std::sqrt(disc);
        c = std::cosh(d);
        s = std::sinh(d) / d;
    } else {
        const double d = std::sqrt(-disc);
        c = std::cos(d);
        s = std::sin(d) / d;
    }
    const double em = std::exp(mu);
    Matrix out(2, 2);
    out(0, 0) = em * (c + s * b(0, 0));
    out(0, 1) = em * s * b(0, 1);
    out(1, 0) = em * s * b(1, 0);
    out(1, 1) = em * (c + s * b(1, 1));
    return out;
}

Matrix expm_pade(const Matrix& a) {
    // Degree-13 Pade with scaling and squaring (Higham 2005).
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const double theta13 = 5.371920351148152;
    const Eigen::Index n = a.rows();

    const double norm = a.cwiseAbs().colwise().sum().maxCoeff(); // 1-norm
    int squarings = 0;
    Matrix as = a;
    if (norm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
        as /= std::ldexp(1.0, squarings);
    }

    const Matrix ident = Matrix::Identity(n, n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix u =
        as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
              b[3] * a2 + b[1] * ident);
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                     b[2] * a2 + b[0] * ident;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

} // namespace detail

Matrix matrix_exponential(const Matrix& m, double u) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw std::invalid_argument("matrix_exponential: matrix must be square");
    if (!m.allFinite() || !std::isfinite(u))
        throw std::invalid_argument("matrix_exponential: non-finite input");
    const Eigen::Index n = m.rows();
    if (u == 0.0) return Matrix::Identity(n, n);
    if (n == 1) {
        Matrix out(1, 1);
        out(0, 0) = std::exp(u * m(0, 0));
        return out;
    }
    const Matrix a = u * m;
    return n == 2 ? detail::expm_closed_2x2(a) : detail::expm_pade(a);
}

Matrix expm_frechet(const Matrix& a, const Matrix& v) {
    const Eigen::Index n = a.rows();
    Matrix block = Matrix::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = a;
    block.topRightCorner(n, n) = v;
    block.bottomRightCorner(n, n) = a;
    return detail::expm_pade(block).topRightCorner(n, n);
}

Vector finite_diff_gradient(const ObjectiveFn& f, const Vector& point, double step) {
    if (!(step > 0)) throw std::invalid_argument("finite_diff_gradient: step must be > 0");
    Vector g(point.size());
    Vector x = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double h = step * (1.0 + std::abs(point[i]));
        x[i] = point[i] + h;
        const double up = f(x);
        x[i] = point[i] - h;
        const double down = f(x);
        x[i] = point[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

Matrix finite_diff_hessian(const GradientFn& grad, const Vector& point, double step) {
    const Eigen::Index p = point.size();
    Matrix h(p, p);
    Vector x = point;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double hj = step * (1.0 + std::abs(point[j]));
        x[j] = point[j] + hj;
        const Vector up = grad(x);
        x[j] = point[j] - hj;
        const Vector down = grad(x);
        x[j] = point[j];
        h.col(j) = (up - down) / (2.0 * hj);
    }
    return 0.5 * (h + h.transpose());
}

namespace {

OptimResult maximize_impl(const ObjectiveFn& f, const GradientFn& grad, const Vector& init,
                          const OptimOptions& opts) {
    const Eigen::Index p = init.size();
    Vector x = init;
    double fx = f(x);
    if (!std::isfinite(fx))
        throw std::invalid_argument("maximize: objective not finite at init");

    Vector g = grad(x);
    Matrix hinv = Matrix::Identity(p, p); // inverse-Hessian approx of -f
    OptimResult result;
    result.iterations = 0;

    // Best point seen, so the returned value never falls below f(init)
    // even with the noise allowance in the line search.
    Vector best_x = x;
    double best_f = fx;

    bool first_update = true;
    bool converged = g.lpNorm<Eigen::Infinity>() < opts.tol;
    for (int it = 0; it < opts.max_iterations && !converged; ++it) {
        result.iterations = it + 1;
        Vector dir = hinv * g; // ascent direction
        double slope = g.dot(dir);
        if (!(slope > 0) || !dir.allFinite()) {
            hinv.setIdentity();
            first_update = true;
            dir = g;
            slope = g.dot(g);
        }

        // Backtracking Armijo search on the ascent, with an absolute
        // allowance at the objective's floating-point noise floor so steps
        // near the optimum are not rejected for sub-eps regressions.
        const double noise = 1e-12 * (1.0 + std::abs(fx));
        double alpha = 1.0;
        double fnew = fx;
        Vector xnew = x;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xnew = x + alpha * dir;
            fnew = f(xnew);
            if (std::isfinite(fnew) && fnew >= fx + 1e-4 * alpha * slope - noise) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break; // converged stays false unless the gradient already met tol

        Vector gnew = grad(xnew);
        const Vector s = xnew - x;
        const Vector y = g - gnew; // gradient change of -f
        const double ys = y.dot(s);
        if (ys > 1e-12 * s.norm() * y.norm()) {
            if (first_update) {
                // Size the initial inverse Hessian to the observed
                // curvature before the first update.
                hinv *= ys / y.squaredNorm();
                first_update = false;
            }
            // BFGS update of the inverse Hessian of -f.
            const double rho = 1.0 / ys;
            const Matrix ident = Matrix::Identity(p, p);
            const Matrix left = ident - rho * s * y.transpose();
            hinv = left * hinv * left.transpose() + rho * s * s.transpose();
        }
        x = xnew;
        fx = fnew;
        g = gnew;
        if (fx >= best_f) {
            best_f = fx;
            best_x = x;
        }
        converged = g.lpNorm<Eigen::Infinity>() < opts.tol;
    }

    if (converged) {
        // The converged iterate wins even if an earlier point was better at
        // noise level; its gradient actually met the tolerance.
        best_x = x;
        best_f = fx;
    }
    result.argmax = best_x;
    result.value = best_f;
    result.converged = converged;
    if (opts.want_hessian) {
        // Observed information: Hessian of -f from central differences on
        // the gradient.
        auto neg_grad = [&](const Vector& xx) { return Vector(-grad(xx)); };
        result.hessian = finite_diff_hessian(neg_grad, best_x, opts.hessian_step);
    } else {
        result.hessian = Matrix::Zero(p, p);
    }
    return result;
}

} // namespace

OptimResult maximize(const ObjectiveFn& f, const GradientFn& grad, const Vector& init,
                     const OptimOptions& opts) {
    return maximize_impl(f, grad, init, opts);
}

OptimResult maximize(const ObjectiveFn& f, const Vector& init, const OptimOptions& opts) {
    auto grad = [&f](const Vector& x) { return finite_diff_gradient(f, x, 1e-6); };
    return maximize_impl(f, grad, init, opts);
}

} // namespace raildelay::numerics
