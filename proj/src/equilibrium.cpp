#include "gridswitch/equilibrium.hpp"

#include <cmath>

#include "gridswitch/numeric.hpp"

namespace gridswitch {

namespace {

double safe_div(double num, double gain) { return gain > 0.0 ? num / gain : 0.0; }

double max_norm(const Eigen::VectorXd& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

Eigen::VectorXd flat_start(Mode mode, const SystemConfig& cfg) {
    const auto& p = cfg.params;
    const auto& sp = cfg.sp;
    const double v_d = 1.0, v_q = 0.0;
    const double i_d = sp.p_ref, i_q = -sp.q_ref;
    const double i_ld = i_d - p.omega0 * p.c_f * v_q;
    const double i_lq = i_q + p.omega0 * p.c_f * v_d;

    if (mode == Mode::Gfl) {
        const auto& g = cfg.gfl;
        GflState x;
        x.zeta = safe_div(p.omega0, g.ki_pll);
        x.gamma_d = safe_div(i_ld, g.ki_o1);
        x.gamma_q = safe_div(i_lq, g.ki_o1);
        x.xi_d = safe_div(p.r_f * i_ld, g.ki_i1);
        x.xi_q = safe_div(p.r_f * i_lq, g.ki_i1);
        x.i_d = i_d;
        x.i_q = i_q;
        x.i_ld = i_ld;
        x.i_lq = i_lq;
        x.v_d = v_d;
        x.v_q = v_q;
        return x.to_vector();
    }
    const auto& g = cfg.gfm;
    GfmState x;
    x.omega = p.omega0;
    x.i_d = i_d;
    x.i_q = i_q;
    x.i_ld = i_ld;
    x.i_lq = i_lq;
    x.v_d = v_d;
    x.v_q = v_q;
    const auto pq = power_outputs(v_d, v_q, i_d, i_q);
    const double u = g.k_u * (sp.vd_ref - v_d) + g.k_q * (sp.q_ref - pq.q);
    x.e_int = safe_div(v_d - sp.vd_ref - g.kp_q * u, g.ki_q);
    x.xi_d = safe_div(p.r_f * i_ld, g.ki_i2);
    x.xi_q = safe_div(p.r_f * i_lq, g.ki_i2);
    return x.to_vector();
}

EquilibriumResult try_solve_equilibrium(Mode mode, const SystemConfig& cfg,
                                        const std::optional<Eigen::VectorXd>& guess,
                                        const NewtonOptions& opts) {
    const auto f = [&](const Eigen::VectorXd& x) { return derivatives(mode, x, cfg); };
    const int n = state_size(mode);

    EquilibriumResult res;
    res.mode = mode;
    res.state = guess ? *guess : flat_start(mode, cfg);
    if (res.state.size() != n) throw DomainError("initial guess has the wrong dimension");

    Eigen::VectorXd fx = f(res.state);
    res.residual_norm = max_norm(fx);
    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        if (!std::isfinite(res.residual_norm)) break;
        if (res.residual_norm < opts.tol) {
            res.converged = true;
            return res;
        }
        const Eigen::MatrixXd jac = central_jacobian(f, res.state, n);
        if (!jac.allFinite()) break;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        lu.setThreshold(1e-13);
        if (!lu.isInvertible()) break;
        const Eigen::VectorXd step = lu.solve(-fx);

        // Step halving: accept the first trial that lowers the residual.
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
            const Eigen::VectorXd trial = res.state + scale * step;
            const Eigen::VectorXd ft = f(trial);
            const double r = max_norm(ft);
            if (std::isfinite(r) && r < res.residual_norm) {
                res.state = trial;
                fx = ft;
                res.residual_norm = r;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    res.converged = res.residual_norm < opts.tol;
    return res;
}

EquilibriumResult solve_equilibrium(Mode mode, const SystemConfig& cfg,
                                    const std::optional<Eigen::VectorXd>& guess,
                                    const NewtonOptions& opts) {
    auto res = try_solve_equilibrium(mode, cfg, guess, opts);
    if (!res.converged)
        throw EquilibriumError(std::string(to_string(mode)) +
                                   " equilibrium did not converge (residual " +
                                   std::to_string(res.residual_norm) + " after " +
                                   std::to_string(res.iterations) + " iterations)",
                               res.residual_norm, res.iterations);
    return res;
}

}  // namespace gridswitch
