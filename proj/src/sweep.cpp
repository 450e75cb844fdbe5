#include "gridswitch/sweep.hpp"

#include <omp.h>

#include "gridswitch/config.hpp"
#include "gridswitch/linearization.hpp"

namespace gridswitch {

void set_jobs(int jobs) {
    if (jobs > 0) omp_set_num_threads(jobs);
}

int max_jobs() { return omp_get_max_threads(); }

std::vector<std::optional<double>> evaluate_margins_serial(const MarginFn& fn,
                                                           const std::vector<Eigen::VectorXd>& pts) {
    std::vector<std::optional<double>> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = fn(pts[i]);
    return out;
}

std::vector<std::optional<double>> evaluate_margins_parallel(
    const MarginFn& fn, const std::vector<Eigen::VectorXd>& pts) {
    std::vector<std::optional<double>> out(pts.size());
    const auto n = static_cast<long>(pts.size());
    // Margin cost varies with Newton iteration count, hence dynamic scheduling.
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) out[i] = fn(pts[i]);
    return out;
}

std::vector<std::optional<double>> evaluate_margins(const MarginFn& fn,
                                                    const std::vector<Eigen::VectorXd>& pts,
                                                    Exec exec) {
    return exec == Exec::Serial ? evaluate_margins_serial(fn, pts)
                                : evaluate_margins_parallel(fn, pts);
}

MarginFn model_margin_fn(Mode mode, const SystemConfig& base, std::vector<std::string> keys) {
    for (const auto& k : keys)
        if (!is_parameter_key(k)) throw ConfigError("unknown parameter key '" + k + "'");
    return [mode, base, keys = std::move(keys)](const Eigen::VectorXd& p) -> std::optional<double> {
        if (p.size() != static_cast<Eigen::Index>(keys.size()))
            throw DomainError("point dimension does not match the parameter keys");
        SystemConfig cfg = base;
        for (std::size_t i = 0; i < keys.size(); ++i) set_parameter(cfg, keys[i], p[i]);
        return try_margin(mode, cfg);
    };
}

std::vector<Eigen::VectorXd> grid_points(const Eigen::Vector2d& lower, const Eigen::Vector2d& upper,
                                         int n) {
    if (n < 2) throw DomainError("grid needs at least 2 points per axis");
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Eigen::VectorXd p(2);
            p[0] = lower[0] + (upper[0] - lower[0]) * i / (n - 1);
            p[1] = lower[1] + (upper[1] - lower[1]) * j / (n - 1);
            pts.push_back(p);
        }
    return pts;
}

}  // namespace gridswitch
