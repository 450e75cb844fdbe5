#pragma once

#include <complex>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/equilibrium.hpp"
#include "gridswitch/model.hpp"

namespace gridswitch {

/// Default width of the marginal band around the imaginary axis.
inline constexpr double kMarginEpsilon = 0.01;

struct LinearModel {
    Mode mode = Mode::Gfl;
    Eigen::VectorXd equilibrium;
    Eigen::MatrixXd a;  // n x n
    Eigen::MatrixXd b;  // n x m, columns follow input_vector()
};

enum class Stability { Stable, Marginal, Unstable };
std::string_view to_string(Stability s);

struct StabilityReport {
    std::vector<std::complex<double>> eigenvalues;  // rad/s, sorted by descending real part
    std::complex<double> rightmost;
    double margin_mu = 0.0;  // |Re(rightmost)|
    double signed_margin = 0.0;  // -Re(rightmost): positive when stable
    Stability classification = Stability::Stable;
};

/// Central-difference A and B at a converged equilibrium.
LinearModel linearize(Mode mode, const SystemConfig& cfg, const EquilibriumResult& eq);

StabilityReport stability_report(const Eigen::MatrixXd& a, double epsilon = kMarginEpsilon);
StabilityReport stability_report(const LinearModel& model, double epsilon = kMarginEpsilon);

/// Signed stability margin: solve equilibrium, linearize, take -max Re(lambda).
/// Throws EquilibriumError when no steady state exists.
double margin(Mode mode, const SystemConfig& cfg);

/// Like margin() but returns nullopt when the equilibrium cannot be found or
/// the parameters are outside their domain.
std::optional<double> try_margin(Mode mode, const SystemConfig& cfg);

/// Row-major comma-separated dump at 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);

}  // namespace gridswitch
