#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/model.hpp"

namespace gridswitch {

/// Signed margin at a parameter point; nullopt when no equilibrium exists.
using MarginFn = std::function<std::optional<double>(const Eigen::VectorXd&)>;

enum class Exec { Serial, Parallel };

/// Sets the OpenMP worker count; jobs <= 0 keeps the runtime default.
void set_jobs(int jobs);
int max_jobs();

/// Reference implementation: one point after another.
std::vector<std::optional<double>> evaluate_margins_serial(const MarginFn& fn,
                                                           const std::vector<Eigen::VectorXd>& pts);

/// OpenMP implementation. Output order matches input order, so results are
/// identical to the serial version for any thread count.
std::vector<std::optional<double>> evaluate_margins_parallel(
    const MarginFn& fn, const std::vector<Eigen::VectorXd>& pts);

std::vector<std::optional<double>> evaluate_margins(const MarginFn& fn,
                                                    const std::vector<Eigen::VectorXd>& pts,
                                                    Exec exec = Exec::Parallel);

/// Margin of `mode` with the named configuration keys overwritten by the
/// point's coordinates (in order).
MarginFn model_margin_fn(Mode mode, const SystemConfig& base, std::vector<std::string> keys);

/// Row-major grid over a 2-D box, `n` points per axis including the edges.
std::vector<Eigen::VectorXd> grid_points(const Eigen::Vector2d& lower, const Eigen::Vector2d& upper,
                                         int n);

}  // namespace gridswitch
