#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "gridswitch/model.hpp"

namespace gridswitch {

struct NewtonOptions {
    double tol = 1e-10;  // max-norm of the derivative vector
    int max_iter = 200;
    int max_halvings = 30;
};

struct EquilibriumResult {
    Mode mode = Mode::Gfl;
    Eigen::VectorXd state;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Newton failure: divergence, iteration limit or singular Jacobian.
class EquilibriumError : public std::runtime_error {
public:
    EquilibriumError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Starting point: GCP voltage (1, 0), currents (P_ref, -Q_ref), angles 0 and
/// integrators set so the PI outputs reproduce that guess.
Eigen::VectorXd flat_start(Mode mode, const SystemConfig& cfg);

/// Damped Newton on the full right-hand side. Throws EquilibriumError when it
/// cannot reach `opts.tol`.
EquilibriumResult solve_equilibrium(Mode mode, const SystemConfig& cfg,
                                    const std::optional<Eigen::VectorXd>& guess = std::nullopt,
                                    const NewtonOptions& opts = {});

/// Same as solve_equilibrium but reports failure through `converged = false`.
EquilibriumResult try_solve_equilibrium(Mode mode, const SystemConfig& cfg,
                                        const std::optional<Eigen::VectorXd>& guess = std::nullopt,
                                        const NewtonOptions& opts = {});

}  // namespace gridswitch
