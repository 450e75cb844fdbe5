#pragma once

#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gridswitch {

inline constexpr double kPi = std::numbers::pi;

/// Control mode of the inverter; doubles as the switching signal (GFL = 1, GFM = 2).
enum class Mode { Gfl = 1, Gfm = 2 };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);
int state_size(Mode mode);
int input_size(Mode mode);

/// Raised for parameter sets or inputs that violate a documented domain.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Circuit and grid description, per-unit unless noted.
struct SystemParams {
    double r_f = 6.89e-4;
    double l_f = 0.54;
    double c_f = 0.067;
    double scr = 5.0;
    double x_over_r = 5.0;
    double v_g = 1.0;
    double omega0 = 1.0;
    double omega_base = 100.0 * kPi;  // rad/s

    void validate() const;
};

struct GflGains {
    double kp_pll = 0.5;
    double ki_pll = 1.0 / kPi;
    double kp_o1 = 0.01;
    double ki_o1 = 1.0 / kPi;
    double kp_i1 = 1.0;
    double ki_i1 = 10.0 / kPi;

    void validate() const;
};

// k_u is calibrated so the GFM inner-current-loop stability boundary passes
// through K_pi2 = 6.73 at K_ii2 = 500, SCR = 4 (see tests/test_calibration.cpp).
struct GfmGains {
    double j_virt = 1.0 / (100.0 * kPi);
    double k_d = 20.0;
    double k_omega = 0.0;
    double k_u = 1.92;
    double k_q = 1.0;
    double kp_q = 0.1;
    double ki_q = 10.0 / kPi;
    double kp_o2 = 1.0;
    double ki_o2 = 1.0 / kPi;
    double kp_i2 = 10.0;
    double ki_i2 = 1.0 / kPi;

    void validate() const;
};

struct Setpoint {
    double p_ref = 1.0;
    double q_ref = 0.0;
    double vd_ref = 1.0;
    double vq_ref = 0.0;
    double bound = 2.0;  // sanity limit on |reference|

    void validate() const;
};

/// Everything needed to evaluate either subsystem.
struct SystemConfig {
    SystemParams params;
    GflGains gfl;
    GfmGains gfm;
    Setpoint sp;

    void validate() const;
};

struct GridImpedance {
    double r_g;
    double l_g;
};

/// Line impedance from grid strength: |Z| = v_g^2 / scr split by the X/R ratio.
/// x_over_r may be +inf (purely inductive line).
GridImpedance grid_impedance(double scr, double x_over_r, double v_g);

struct PowerFlow {
    double p;
    double q;
};

PowerFlow power_outputs(double v_d, double v_q, double i_d, double i_q);

// State layouts. The ordering is part of the public contract (A and B
// matrices, trace files and matrix dumps use it).
namespace gfl_index {
enum : int { zeta, delta, gamma_d, gamma_q, xi_d, xi_q, i_d, i_q, i_ld, i_lq, v_d, v_q, size };
}
namespace gfm_index {
enum : int { delta, omega, e_int, gamma_d, gamma_q, xi_d, xi_q, i_d, i_q, i_ld, i_lq, v_d, v_q, size };
}

/// Names of the state entries in layout order.
const std::vector<std::string>& state_names(Mode mode);

struct GflState {
    static constexpr int kSize = gfl_index::size;

    double zeta = 0.0;
    double delta = 0.0;
    double gamma_d = 0.0;
    double gamma_q = 0.0;
    double xi_d = 0.0;
    double xi_q = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
    double i_ld = 0.0;
    double i_lq = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;

    Eigen::VectorXd to_vector() const;
    static GflState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
};

struct GfmState {
    static constexpr int kSize = gfm_index::size;

    double delta = 0.0;
    double omega = 1.0;
    double e_int = 0.0;
    double gamma_d = 0.0;
    double gamma_q = 0.0;
    double xi_d = 0.0;
    double xi_q = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
    double i_ld = 0.0;
    double i_lq = 0.0;
    double v_d = 0.0;
    double v_q = 0.0;

    Eigen::VectorXd to_vector() const;
    static GfmState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
};

/// Algebraic controller quantities evaluated at a state.
struct ControlSignals {
    double omega;  // frame frequency, p.u.
    double p;
    double q;
    double i_ldref;
    double i_lqref;
    double e_dref;
    double e_qref;
    double e_ref = 0.0;  // GFM voltage magnitude reference (unused for GFL)
};

ControlSignals gfl_signals(const GflState& x, const SystemParams& params, const GflGains& gains,
                           const Setpoint& sp);
ControlSignals gfm_signals(const GfmState& x, const SystemParams& params, const GfmGains& gains,
                           const Setpoint& sp);
ControlSignals control_signals(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x,
                               const SystemConfig& cfg);

Eigen::VectorXd gfl_derivatives(const GflState& x, const SystemParams& params,
                                const GflGains& gains, const Setpoint& sp);
Eigen::VectorXd gfm_derivatives(const GfmState& x, const SystemParams& params,
                                const GfmGains& gains, const Setpoint& sp);

/// Right-hand side in vector form, dispatching on mode.
Eigen::VectorXd derivatives(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const SystemConfig& cfg);

/// Input vector u1 = [P_ref, Q_ref] (GFL) or u2 = [P_ref, Q_ref, vd_ref, vq_ref] (GFM).
Eigen::VectorXd input_vector(Mode mode, const Setpoint& sp);
Setpoint with_inputs(Mode mode, Setpoint sp, const Eigen::Ref<const Eigen::VectorXd>& u);

/// Physical (mode-independent) part of a state: delta, i_d, i_q, i_ld, i_lq, v_d, v_q.
struct PhysicalState {
    double delta, i_d, i_q, i_ld, i_lq, v_d, v_q;
};
PhysicalState physical_state(Mode mode, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace gridswitch
