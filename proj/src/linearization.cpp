#include "gridswitch/linearization.hpp"

#include <algorithm>
#include <stdexcept>

#include "gridswitch/numeric.hpp"

namespace gridswitch {

std::string_view to_string(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Marginal: return "marginal";
        case Stability::Unstable: return "unstable";
    }
    return "unknown";
}

LinearModel linearize(Mode mode, const SystemConfig& cfg, const EquilibriumResult& eq) {
    if (!eq.converged || eq.mode != mode)
        throw std::invalid_argument("linearize needs a converged equilibrium of the same mode");
    LinearModel lm;
    lm.mode = mode;
    lm.equilibrium = eq.state;
    const int n = state_size(mode);
    lm.a = central_jacobian([&](const Eigen::VectorXd& x) { return derivatives(mode, x, cfg); },
                            eq.state, n);
    const Eigen::VectorXd u0 = input_vector(mode, cfg.sp);
    lm.b = central_jacobian(
        [&](const Eigen::VectorXd& u) {
            SystemConfig c = cfg;
            c.sp = with_inputs(mode, cfg.sp, u);
            return derivatives(mode, eq.state, c);
        },
        u0, n);
    return lm;
}

StabilityReport stability_report(const Eigen::MatrixXd& a, double epsilon) {
    if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("A must be square");
    if (!a.allFinite()) throw std::runtime_error("A contains non-finite entries");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue solver failed");

    StabilityReport rep;
    const auto& ev = solver.eigenvalues();
    rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::stable_sort(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                     [](auto l, auto r) { return l.real() > r.real(); });
    rep.rightmost = rep.eigenvalues.front();
    const double re = rep.rightmost.real();
    rep.margin_mu = std::abs(re);
    rep.signed_margin = -re;
    if (re > 0.0)
        rep.classification = Stability::Unstable;
    else if (re >= -epsilon)
        rep.classification = Stability::Marginal;
    else
        rep.classification = Stability::Stable;
    return rep;
}

StabilityReport stability_report(const LinearModel& model, double epsilon) {
    return stability_report(model.a, epsilon);
}

double margin(Mode mode, const SystemConfig& cfg) {
    const auto eq = solve_equilibrium(mode, cfg);
    return stability_report(linearize(mode, cfg, eq)).signed_margin;
}

std::optional<double> try_margin(Mode mode, const SystemConfig& cfg) {
    try {
        cfg.validate();
        const auto eq = try_solve_equilibrium(mode, cfg);
        if (!eq.converged) return std::nullopt;
        return stability_report(linearize(mode, cfg, eq)).signed_margin;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
    const auto old = out.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
    out.precision(old);
}

}  // namespace gridswitch
