#pragma once

// Reference evaluations written separately from the library so tests compare
// two derivations of the same physics. The circuit here uses complex space
// vectors; the library works component-wise.

#include <cmath>
#include <complex>
#include <vector>

#include "gridswitch/model.hpp"

namespace oracle {

using cplx = std::complex<double>;
using gridswitch::SystemConfig;

struct Line {
    double r, x;
};

inline Line line_of(const SystemConfig& c) {
    const double z = c.params.v_g * c.params.v_g / c.params.scr;
    if (std::isinf(c.params.x_over_r)) return {0.0, z};
    const double k = c.params.x_over_r;
    return {z / std::hypot(1.0, k), z * k / std::hypot(1.0, k)};
}

// Filter, capacitor and line in space-vector form, each row scaled by the base
// frequency: L di/dt = v - v_g e^{-j delta} - j w L i - R i, and so on.
inline void circuit(const SystemConfig& c, double w, double delta, cplx i, cplx il, cplx v, cplx e,
                    cplx& di, cplx& dil, cplx& dv) {
    const auto& p = c.params;
    const Line g = line_of(c);
    const cplx j(0.0, 1.0);
    const cplx vg = p.v_g * std::exp(-j * delta);
    di = p.omega_base / g.x * (v - vg - j * w * g.x * i - g.r * i);
    dil = p.omega_base / p.l_f * (e - v - j * w * p.l_f * il - p.r_f * il);
    dv = p.omega_base / p.c_f * (il - i - j * w * p.c_f * v);
}

// Grid-following right-hand side; x in the library's documented order.
inline std::vector<double> gfl_rhs(const SystemConfig& c, const std::vector<double>& x) {
    const double zeta = x[0], delta = x[1], gd = x[2], gq = x[3], xd = x[4], xq = x[5];
    const cplx i(x[6], x[7]), il(x[8], x[9]), v(x[10], x[11]);
    const auto& k = c.gfl;
    const cplx s = v * std::conj(i);  // P + jQ
    const double p = s.real();
    const double q = s.imag();
    const double w = k.kp_pll * v.imag() + k.ki_pll * zeta;
    const double ild_ref = k.kp_o1 * (c.sp.p_ref - p) + k.ki_o1 * gd;
    const double ilq_ref = k.kp_o1 * (q - c.sp.q_ref) + k.ki_o1 * gq;
    // Current controller with decoupling: e = v + j w L_f i_L + PI(i_ref - i_L).
    const cplx il_ref(ild_ref, ilq_ref);
    const cplx pi = k.kp_i1 * (il_ref - il) + k.ki_i1 * cplx(xd, xq);
    const cplx e = v + cplx(0.0, 1.0) * w * c.params.l_f * il + pi;
    cplx di, dil, dv;
    circuit(c, w, delta, i, il, v, e, di, dil, dv);
    return {v.imag(),
            c.params.omega_base * (w - c.params.omega0),
            c.sp.p_ref - p,
            q - c.sp.q_ref,
            ild_ref - il.real(),
            ilq_ref - il.imag(),
            di.real(), di.imag(), dil.real(), dil.imag(), dv.real(), dv.imag()};
}

inline std::vector<double> gfm_rhs(const SystemConfig& c, const std::vector<double>& x) {
    const double delta = x[0], w = x[1], eint = x[2], gd = x[3], gq = x[4], xd = x[5], xq = x[6];
    const cplx i(x[7], x[8]), il(x[9], x[10]), v(x[11], x[12]);
    const auto& k = c.gfm;
    const auto& sp = c.sp;
    const double w0 = c.params.omega0;
    const double p = (v * std::conj(i)).real();
    const double q = (v * std::conj(i)).imag();
    const double u = k.k_u * (sp.vd_ref - v.real()) + k.k_q * (sp.q_ref - q);
    const double eref = sp.vd_ref + k.kp_q * u + k.ki_q * eint;
    const cplx j(0.0, 1.0);
    // Voltage controller with capacitor decoupling, then current controller.
    const cplx v_ref(eref, sp.vq_ref);
    const cplx il_ref = i + j * w * c.params.c_f * v + k.kp_o2 * (v_ref - v) + k.ki_o2 * cplx(gd, gq);
    const cplx e = v + j * w * c.params.l_f * il + k.kp_i2 * (il_ref - il) + k.ki_i2 * cplx(xd, xq);
    cplx di, dil, dv;
    circuit(c, w, delta, i, il, v, e, di, dil, dv);
    const double dw = ((sp.p_ref - p) / w0 - (k.k_d + k.k_omega / w0) * (w - w0)) / k.j_virt;
    return {c.params.omega_base * (w - w0),
            dw,
            u,
            eref - v.real(),
            sp.vq_ref - v.imag(),
            il_ref.real() - il.real(),
            il_ref.imag() - il.imag(),
            di.real(), di.imag(), dil.real(), dil.imag(), dv.real(), dv.imag()};
}

/// Steady-state power flow at the connection point with the frame aligned to
/// the local voltage (v_q = 0): the voltage magnitude V solves
/// |V - Z (P - jQ) / V| = v_g. For GFM, Q follows the droop Q = K_u (v_dref - V) / K_q.
struct Phasor {
    double v;      // v_d
    double delta;  // grid angle in the local frame
    double i_d, i_q;
    double q;
};

template <class QOfV>
Phasor power_flow(const SystemConfig& c, QOfV q_of_v) {
    const Line g = line_of(c);
    const cplx z(g.r, g.x);
    const double pw = c.sp.p_ref;
    auto residual = [&](double v) {
        const cplx i = cplx(pw, -q_of_v(v)) / v;
        return std::abs(v - z * i) - c.params.v_g;
    };
    // High-voltage branch: bracket from the grid voltage upward.
    double lo = 0.5, hi = 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((residual(mid) > 0.0) == (residual(hi) > 0.0))
            hi = mid;
        else
            lo = mid;
    }
    const double v = 0.5 * (lo + hi);
    const double q = q_of_v(v);
    const cplx i = cplx(pw, -q) / v;
    const cplx vg = v - z * i;
    return {v, -std::arg(vg), i.real(), i.imag(), q};
}

}  // namespace oracle
