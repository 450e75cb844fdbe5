#include "gridswitch/model.hpp"

#include <cmath>
#include <limits>

namespace gridswitch {

const std::vector<std::string>& state_names(Mode mode) {
    static const std::vector<std::string> gfl = {"zeta", "delta", "gamma_d", "gamma_q", "xi_d", "xi_q",
                                                 "i_d",  "i_q",   "i_ld",    "i_lq",    "v_d",  "v_q"};
    static const std::vector<std::string> gfm = {"delta", "omega", "e_int", "gamma_d", "gamma_q",
                                                 "xi_d",  "xi_q",  "i_d",   "i_q",     "i_ld",
                                                 "i_lq",  "v_d",   "v_q"};
    return mode == Mode::Gfl ? gfl : gfm;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::Gfl ? "gfl" : "gfm"; }

Mode parse_mode(std::string_view text) {
    if (text == "gfl" || text == "GFL" || text == "1") return Mode::Gfl;
    if (text == "gfm" || text == "GFM" || text == "2") return Mode::Gfm;
    throw DomainError("unknown mode '" + std::string(text) + "' (expected gfl or gfm)");
}

int state_size(Mode mode) { return mode == Mode::Gfl ? GflState::kSize : GfmState::kSize; }
int input_size(Mode mode) { return mode == Mode::Gfl ? 2 : 4; }

void SystemParams::validate() const {
    require(std::isfinite(r_f) && r_f >= 0.0, "r_f must be finite and >= 0");
    require(std::isfinite(l_f) && l_f > 0.0, "l_f must be > 0");
    require(std::isfinite(c_f) && c_f > 0.0, "c_f must be > 0");
    require(std::isfinite(scr) && scr > 0.0, "scr must be > 0");
    require(x_over_r > 0.0 && !std::isnan(x_over_r), "x_over_r must be > 0");
    require(std::isfinite(v_g) && v_g > 0.0, "v_g must be > 0");
    require(std::isfinite(omega0) && omega0 > 0.0, "omega0 must be > 0");
    require(std::isfinite(omega_base) && omega_base > 0.0, "omega_base must be > 0");
}

void GflGains::validate() const {
    for (double g : {kp_pll, ki_pll, kp_o1, ki_o1, kp_i1, ki_i1})
        require(finite_nonneg(g), "GFL gains must be finite and >= 0");
}

void GfmGains::validate() const {
    require(std::isfinite(j_virt) && j_virt > 0.0, "j_virt must be > 0");
    for (double g : {k_d, k_omega, k_u, k_q, kp_q, ki_q, kp_o2, ki_o2, kp_i2, ki_i2})
        require(finite_nonneg(g), "GFM gains must be finite and >= 0");
}

void Setpoint::validate() const {
    require(std::isfinite(bound) && bound > 0.0, "setpoint bound must be > 0");
    for (double v : {p_ref, q_ref, vd_ref, vq_ref})
        require(std::isfinite(v) && std::abs(v) <= bound, "setpoint magnitude exceeds bound");
}

void SystemConfig::validate() const {
    params.validate();
    gfl.validate();
    gfm.validate();
    sp.validate();
}

GridImpedance grid_impedance(double scr, double x_over_r, double v_g) {
    if (!(scr > 0.0) || !(x_over_r > 0.0) || !(v_g > 0.0) || !std::isfinite(scr))
        throw DomainError("grid_impedance requires scr > 0, x_over_r > 0, v_g > 0");
    const double z = v_g * v_g / scr;
    if (std::isinf(x_over_r)) return {0.0, z};
    const double r = z / std::sqrt(1.0 + x_over_r * x_over_r);
    return {r, r * x_over_r};
}

PowerFlow power_outputs(double v_d, double v_q, double i_d, double i_q) {
    return {v_d * i_d + v_q * i_q, v_q * i_d - v_d * i_q};
}

Eigen::VectorXd GflState::to_vector() const {
    Eigen::VectorXd x(kSize);
    x << zeta, delta, gamma_d, gamma_q, xi_d, xi_q, i_d, i_q, i_ld, i_lq, v_d, v_q;
    return x;
}

GflState GflState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != kSize) throw DomainError("GFL state must have 12 components");
    namespace ix = gfl_index;
    return {x[ix::zeta], x[ix::delta], x[ix::gamma_d], x[ix::gamma_q], x[ix::xi_d], x[ix::xi_q],
            x[ix::i_d],  x[ix::i_q],   x[ix::i_ld],    x[ix::i_lq],    x[ix::v_d],  x[ix::v_q]};
}

Eigen::VectorXd GfmState::to_vector() const {
    Eigen::VectorXd x(kSize);
    x << delta, omega, e_int, gamma_d, gamma_q, xi_d, xi_q, i_d, i_q, i_ld, i_lq, v_d, v_q;
    return x;
}

GfmState GfmState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != kSize) throw DomainError("GFM state must have 13 components");
    namespace ix = gfm_index;
    return {x[ix::delta], x[ix::omega], x[ix::e_int], x[ix::gamma_d], x[ix::gamma_q],
            x[ix::xi_d],  x[ix::xi_q],  x[ix::i_d],   x[ix::i_q],     x[ix::i_ld],
            x[ix::i_lq],  x[ix::v_d],   x[ix::v_q]};
}

ControlSignals gfl_signals(const GflState& x, const SystemParams& params, const GflGains& g,
                           const Setpoint& sp) {
    ControlSignals s{};
    s.omega = g.kp_pll * x.v_q + g.ki_pll * x.zeta;
    const auto pq = power_outputs(x.v_d, x.v_q, x.i_d, x.i_q);
    s.p = pq.p;
    s.q = pq.q;
    s.i_ldref = g.kp_o1 * (sp.p_ref - s.p) + g.ki_o1 * x.gamma_d;
    s.i_lqref = g.kp_o1 * (s.q - sp.q_ref) + g.ki_o1 * x.gamma_q;
    s.e_dref = x.v_d - s.omega * params.l_f * x.i_lq + g.kp_i1 * (s.i_ldref - x.i_ld) +
               g.ki_i1 * x.xi_d;
    s.e_qref = x.v_q + s.omega * params.l_f * x.i_ld + g.kp_i1 * (s.i_lqref - x.i_lq) +
               g.ki_i1 * x.xi_q;
    return s;
}

namespace {

double rvl_error(const GfmState& x, const GfmGains& g, const Setpoint& sp, double q) {
    return g.k_u * (sp.vd_ref - x.v_d) + g.k_q * (sp.q_ref - q);
}

// Filter, capacitor and line equations shared by both modes (already scaled
// to seconds). e_d, e_q are the modulated voltages (= references).
void circuit_rhs(const SystemParams& p, double omega, double delta, double i_d, double i_q,
                 double i_ld, double i_lq, double v_d, double v_q, double e_d, double e_q,
                 double* out) {
    const auto z = grid_impedance(p.scr, p.x_over_r, p.v_g);
    const double wb = p.omega_base;
    const double v_gd = p.v_g * std::cos(delta);
    const double v_gq = -p.v_g * std::sin(delta);
    out[0] = wb / z.l_g * (v_d - v_gd + omega * z.l_g * i_q - z.r_g * i_d);
    out[1] = wb / z.l_g * (v_q - v_gq - omega * z.l_g * i_d - z.r_g * i_q);
    out[2] = wb / p.l_f * (e_d - v_d + omega * p.l_f * i_lq - p.r_f * i_ld);
    out[3] = wb / p.l_f * (e_q - v_q - omega * p.l_f * i_ld - p.r_f * i_lq);
    out[4] = wb / p.c_f * (i_ld - i_d + omega * p.c_f * v_q);
    out[5] = wb / p.c_f * (i_lq - i_q - omega * p.c_f * v_d);
}

}  // namespace

ControlSignals gfm_signals(const GfmState& x, const SystemParams& params, const GfmGains& g,
                           const Setpoint& sp) {
    ControlSignals s{};
    s.omega = x.omega;
    const auto pq = power_outputs(x.v_d, x.v_q, x.i_d, x.i_q);
    s.p = pq.p;
    s.q = pq.q;
    s.e_ref = sp.vd_ref + g.kp_q * rvl_error(x, g, sp, s.q) + g.ki_q * x.e_int;
    s.i_ldref = x.i_d - s.omega * params.c_f * x.v_q + g.kp_o2 * (s.e_ref - x.v_d) +
                g.ki_o2 * x.gamma_d;
    s.i_lqref = x.i_q + s.omega * params.c_f * x.v_d + g.kp_o2 * (sp.vq_ref - x.v_q) +
                g.ki_o2 * x.gamma_q;
    s.e_dref = x.v_d - s.omega * params.l_f * x.i_lq + g.kp_i2 * (s.i_ldref - x.i_ld) +
               g.ki_i2 * x.xi_d;
    s.e_qref = x.v_q + s.omega * params.l_f * x.i_ld + g.kp_i2 * (s.i_lqref - x.i_lq) +
               g.ki_i2 * x.xi_q;
    return s;
}

Eigen::VectorXd gfl_derivatives(const GflState& x, const SystemParams& params,
                                const GflGains& gains, const Setpoint& sp) {
    namespace ix = gfl_index;
    const auto s = gfl_signals(x, params, gains, sp);
    Eigen::VectorXd dx(GflState::kSize);
    dx[ix::zeta] = x.v_q;
    dx[ix::delta] = params.omega_base * (s.omega - params.omega0);
    dx[ix::gamma_d] = sp.p_ref - s.p;
    dx[ix::gamma_q] = s.q - sp.q_ref;
    dx[ix::xi_d] = s.i_ldref - x.i_ld;
    dx[ix::xi_q] = s.i_lqref - x.i_lq;
    circuit_rhs(params, s.omega, x.delta, x.i_d, x.i_q, x.i_ld, x.i_lq, x.v_d, x.v_q, s.e_dref,
                s.e_qref, dx.data() + ix::i_d);
    return dx;
}

Eigen::VectorXd gfm_derivatives(const GfmState& x, const SystemParams& params,
                                const GfmGains& gains, const Setpoint& sp) {
    namespace ix = gfm_index;
    const auto s = gfm_signals(x, params, gains, sp);
    const double w0 = params.omega0;
    Eigen::VectorXd dx(GfmState::kSize);
    dx[ix::delta] = params.omega_base * (x.omega - w0);
    dx[ix::omega] = ((sp.p_ref - s.p) / w0 - (gains.k_d + gains.k_omega / w0) * (x.omega - w0)) /
                    gains.j_virt;
    dx[ix::e_int] = rvl_error(x, gains, sp, s.q);
    dx[ix::gamma_d] = s.e_ref - x.v_d;
    dx[ix::gamma_q] = sp.vq_ref - x.v_q;
    dx[ix::xi_d] = s.i_ldref - x.i_ld;
    dx[ix::xi_q] = s.i_lqref - x.i_lq;
    circuit_rhs(params, s.omega, x.delta, x.i_d, x.i_q, x.i_ld, x.i_lq, x.v_d, x.v_q, s.e_dref,
                s.e_qref, dx.data() + ix::i_d);
    return dx;
}

Eigen::VectorXd derivatives(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const SystemConfig& cfg) {
    if (mode == Mode::Gfl)
        return gfl_derivatives(GflState::from_vector(x), cfg.params, cfg.gfl, cfg.sp);
    return gfm_derivatives(GfmState::from_vector(x), cfg.params, cfg.gfm, cfg.sp);
}

ControlSignals control_signals(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x,
                               const SystemConfig& cfg) {
    if (mode == Mode::Gfl)
        return gfl_signals(GflState::from_vector(x), cfg.params, cfg.gfl, cfg.sp);
    return gfm_signals(GfmState::from_vector(x), cfg.params, cfg.gfm, cfg.sp);
}

Eigen::VectorXd input_vector(Mode mode, const Setpoint& sp) {
    if (mode == Mode::Gfl) return Eigen::Vector2d(sp.p_ref, sp.q_ref);
    return Eigen::Vector4d(sp.p_ref, sp.q_ref, sp.vd_ref, sp.vq_ref);
}

Setpoint with_inputs(Mode mode, Setpoint sp, const Eigen::Ref<const Eigen::VectorXd>& u) {
    if (u.size() != input_size(mode)) throw DomainError("input vector size does not match mode");
    sp.p_ref = u[0];
    sp.q_ref = u[1];
    if (mode == Mode::Gfm) {
        sp.vd_ref = u[2];
        sp.vq_ref = u[3];
    }
    return sp;
}

PhysicalState physical_state(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (mode == Mode::Gfl) {
        const auto s = GflState::from_vector(x);
        return {s.delta, s.i_d, s.i_q, s.i_ld, s.i_lq, s.v_d, s.v_q};
    }
    const auto s = GfmState::from_vector(x);
    return {s.delta, s.i_d, s.i_q, s.i_ld, s.i_lq, s.v_d, s.v_q};
}

}  // namespace gridswitch
