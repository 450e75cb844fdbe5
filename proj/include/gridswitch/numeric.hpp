#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace gridswitch {

/// Relative step used by every central-difference Jacobian in the library.
inline constexpr double kDiffStep = 1e-7;

/// Central-difference Jacobian of f at x, column j stepped by
/// kDiffStep * max(1, |x_j|).
template <class F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x, int rows) {
    Eigen::MatrixXd jac(rows, x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = kDiffStep * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        const Eigen::VectorXd fp = f(xp);
        xp[j] = x[j] - h;
        const Eigen::VectorXd fm = f(xp);
        xp[j] = x[j];
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

/// One classical fourth-order Runge-Kutta step of dx/dt = f(x).
template <class F>
Eigen::VectorXd rk4_step(F&& f, const Eigen::VectorXd& x, double dt) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = f(x + dt * k3);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace gridswitch
