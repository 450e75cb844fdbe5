#include "gridswitch/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "gridswitch/config.hpp"
#include "gridswitch/equilibrium.hpp"
#include "gridswitch/numeric.hpp"

namespace gridswitch {

void Scenario::validate() const {
    if (!(duration > 0.0)) throw SimulationError("scenario duration must be positive");
    if (!(dt > 0.0) || dt > duration) throw SimulationError("integration step must be in (0, duration]");
    double prev = -1.0;
    for (const auto& ev : events) {
        if (ev.time < 0.0 || ev.time > duration)
            throw SimulationError("event time outside [0, duration]: " + ev.key);
        if (!(ev.time > prev)) throw SimulationError("event times must be strictly increasing");
        prev = ev.time;
        const std::string key = ev.key.rfind("step.", 0) == 0 ? ev.key.substr(5) : ev.key;
        if (!is_parameter_key(key)) throw SimulationError("unknown event key '" + ev.key + "'");
    }
}

void apply_event(SystemConfig& cfg, const ScenarioEvent& ev) {
    if (ev.key.rfind("step.", 0) == 0) {
        const std::string key = ev.key.substr(5);
        set_parameter(cfg, key, get_parameter(cfg, key) + ev.value);
    } else {
        set_parameter(cfg, ev.key, ev.value);
    }
}

double CsiModeContext::evaluate(double scr, double x_over_r) const {
    return csi_at_operating_point(Eigen::Vector2d(scr, x_over_r), region, space, model, normalization);
}

std::string_view policy_name(const SwitchPolicy& policy) {
    if (std::holds_alternative<ScrThreshold>(policy)) return "threshold";
    if (std::holds_alternative<CsiBased>(policy)) return "csi";
    return "none";
}

Mode decide_switch(const SwitchPolicy& policy, Mode sigma, double scr, double j_active,
                   double j_target) {
    if (const auto* th = std::get_if<ScrThreshold>(&policy))
        return scr >= th->threshold ? Mode::Gfl : Mode::Gfm;
    if (const auto* csi = std::get_if<CsiBased>(&policy)) {
        if (j_target > j_active + csi->epsilon_h) return sigma == Mode::Gfl ? Mode::Gfm : Mode::Gfl;
    }
    return sigma;
}

Eigen::VectorXd integrate(Mode mode, const Eigen::VectorXd& x, const SystemConfig& cfg, double dt) {
    if (!(dt > 0.0)) throw SimulationError("integration step must be positive");
    return rk4_step([&](const Eigen::VectorXd& s) { return derivatives(mode, s, cfg); }, x, dt);
}

double frame_frequency(Mode mode, const Eigen::VectorXd& x, const SystemConfig& cfg) {
    return control_signals(mode, x, cfg).omega;
}

namespace {

double solve_integrator(double target, double rest, double gain, const char* name) {
    const double mismatch = target - rest;
    if (gain > 0.0) return mismatch / gain;
    if (std::abs(mismatch) <= 1e-12) return 0.0;
    throw SimulationError(std::string("bumpless transfer impossible: zero integral gain for ") + name);
}

}  // namespace

Eigen::VectorXd bumpless_transfer(Mode from, const Eigen::VectorXd& x, Mode to,
                                  const SystemConfig& cfg) {
    if (!x.allFinite()) throw SimulationError("cannot transfer a non-finite state");
    if (from == to) return x;
    const ControlSignals src = control_signals(from, x, cfg);
    const PhysicalState ph = physical_state(from, x);
    const auto& p = cfg.params;
    const auto& sp = cfg.sp;
    const double w = src.omega;

    if (to == Mode::Gfm) {
        const auto& g = cfg.gfm;
        GfmState y;
        y.delta = ph.delta;
        y.omega = w;
        y.i_d = ph.i_d;
        y.i_q = ph.i_q;
        y.i_ld = ph.i_ld;
        y.i_lq = ph.i_lq;
        y.v_d = ph.v_d;
        y.v_q = ph.v_q;
        // The reactive-voltage integrator has no matching GFL quantity; it is
        // set so the voltage magnitude reference equals the present v_d.
        const double q = power_outputs(y.v_d, y.v_q, y.i_d, y.i_q).q;
        const double u = g.k_u * (sp.vd_ref - y.v_d) + g.k_q * (sp.q_ref - q);
        y.e_int = solve_integrator(y.v_d, sp.vd_ref + g.kp_q * u, g.ki_q, "ki_q");
        const double e_ref = sp.vd_ref + g.kp_q * u + g.ki_q * y.e_int;
        y.gamma_d = solve_integrator(src.i_ldref, y.i_d - w * p.c_f * y.v_q + g.kp_o2 * (e_ref - y.v_d),
                                     g.ki_o2, "ki_o2");
        y.gamma_q = solve_integrator(src.i_lqref, y.i_q + w * p.c_f * y.v_d + g.kp_o2 * (sp.vq_ref - y.v_q),
                                     g.ki_o2, "ki_o2");
        y.xi_d = solve_integrator(src.e_dref,
                                  y.v_d - w * p.l_f * y.i_lq + g.kp_i2 * (src.i_ldref - y.i_ld),
                                  g.ki_i2, "ki_i2");
        y.xi_q = solve_integrator(src.e_qref,
                                  y.v_q + w * p.l_f * y.i_ld + g.kp_i2 * (src.i_lqref - y.i_lq),
                                  g.ki_i2, "ki_i2");
        return y.to_vector();
    }

    const auto& g = cfg.gfl;
    GflState y;
    y.delta = ph.delta;
    y.i_d = ph.i_d;
    y.i_q = ph.i_q;
    y.i_ld = ph.i_ld;
    y.i_lq = ph.i_lq;
    y.v_d = ph.v_d;
    y.v_q = ph.v_q;
    y.zeta = solve_integrator(w, g.kp_pll * y.v_q, g.ki_pll, "ki_pll");
    const auto pq = power_outputs(y.v_d, y.v_q, y.i_d, y.i_q);
    y.gamma_d = solve_integrator(src.i_ldref, g.kp_o1 * (sp.p_ref - pq.p), g.ki_o1, "ki_o1");
    y.gamma_q = solve_integrator(src.i_lqref, g.kp_o1 * (pq.q - sp.q_ref), g.ki_o1, "ki_o1");
    y.xi_d = solve_integrator(src.e_dref, y.v_d - w * p.l_f * y.i_lq + g.kp_i1 * (src.i_ldref - y.i_ld),
                              g.ki_i1, "ki_i1");
    y.xi_q = solve_integrator(src.e_qref, y.v_q + w * p.l_f * y.i_ld + g.kp_i1 * (src.i_lqref - y.i_lq),
                              g.ki_i1, "ki_i1");
    return y.to_vector();
}

SimulationResult simulate(const Scenario& scenario, const SwitchPolicy& policy,
                          const SystemConfig& cfg, const SimulationOptions& opts) {
    const auto eq = solve_equilibrium(scenario.initial_mode, cfg);
    return simulate_from(scenario, policy, cfg, eq.state, opts);
}

SimulationResult simulate_from(const Scenario& scenario, const SwitchPolicy& policy,
                               const SystemConfig& cfg0, const Eigen::VectorXd& x0,
                               const SimulationOptions& opts) {
    scenario.validate();
    if (x0.size() != state_size(scenario.initial_mode))
        throw SimulationError("initial state does not match the initial mode");
    const auto* csi = std::get_if<CsiBased>(&policy);
    if (csi && (!csi->gfl || !csi->gfm)) throw SimulationError("CSI policy needs a context per mode");

    SimulationResult res;
    SystemConfig cfg = cfg0;
    Mode sigma = scenario.initial_mode;
    Eigen::VectorXd x = x0;
    double theta = 0.0;
    std::size_t next_event = 0;
    const long steps = std::lround(scenario.duration / scenario.dt);
    const long policy_stride = std::max(1L, std::lround(opts.policy_period / scenario.dt));
    const int record_every = std::max(1, opts.record_every);
    double j_active = std::numeric_limits<double>::quiet_NaN();
    double j_target = std::numeric_limits<double>::quiet_NaN();

    auto record = [&](double t) {
        TraceRecord r;
        r.t = t;
        r.sigma = sigma;
        r.state = x;
        const auto ph = physical_state(sigma, x);
        const auto pq = power_outputs(ph.v_d, ph.v_q, ph.i_d, ph.i_q);
        r.p = pq.p;
        r.q = pq.q;
        r.v_a = ph.v_d * std::cos(theta) - ph.v_q * std::sin(theta);
        r.j_active = j_active;
        r.j_target = j_target;
        res.trace.push_back(std::move(r));
    };

    for (long k = 0; k <= steps; ++k) {
        const double t = k * scenario.dt;
        // Events scheduled within half a step of t take effect at t.
        while (next_event < scenario.events.size() &&
               scenario.events[next_event].time <= t + 0.5 * scenario.dt) {
            apply_event(cfg, scenario.events[next_event]);
            ++next_event;
        }

        if (k % policy_stride == 0 && !std::holds_alternative<NoSwitching>(policy)) {
            const double scr = cfg.params.scr;
            if (csi) {
                const CsiModeContext& active = sigma == Mode::Gfl ? *csi->gfl : *csi->gfm;
                const CsiModeContext& target = sigma == Mode::Gfl ? *csi->gfm : *csi->gfl;
                j_active = active.evaluate(scr, cfg.params.x_over_r);
                j_target = target.evaluate(scr, cfg.params.x_over_r);
            }
            const Mode next = decide_switch(policy, sigma, scr, j_active, j_target);
            if (next != sigma) {
                const ControlSignals before = control_signals(sigma, x, cfg);
                const Eigen::VectorXd y = bumpless_transfer(sigma, x, next, cfg);
                const ControlSignals after = control_signals(next, y, cfg);
                SwitchEvent sw;
                sw.t = t;
                sw.from = sigma;
                sw.to = next;
                sw.dp = std::abs(after.p - before.p);
                sw.de_ref = std::max(std::abs(after.e_dref - before.e_dref),
                                     std::abs(after.e_qref - before.e_qref));
                sw.di_ref = std::max(std::abs(after.i_ldref - before.i_ldref),
                                     std::abs(after.i_lqref - before.i_lqref));
                res.switches.push_back(sw);
                x = y;
                sigma = next;
                if (csi) std::swap(j_active, j_target);
            }
        }

        if (k % record_every == 0) record(t);
        if (k == steps) break;

        const double w0 = frame_frequency(sigma, x, cfg);
        x = integrate(sigma, x, cfg, scenario.dt);
        const double w1 = frame_frequency(sigma, x, cfg);
        theta += 0.5 * (w0 + w1) * cfg.params.omega_base * scenario.dt;
        theta = std::remainder(theta, 2.0 * kPi);

        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > opts.divergence_limit) {
            res.diverged = true;
            res.divergence_time = t + scenario.dt;
            if (x.allFinite()) record(t + scenario.dt);
            break;
        }
    }
    return res;
}

std::vector<Eigen::VectorXd> linear_response(const LinearModel& model, const Eigen::VectorXd& du,
                                             double t_step, double duration, double dt) {
    if (du.size() != model.b.cols()) throw SimulationError("input step has the wrong dimension");
    if (!(dt > 0.0) || !(duration > 0.0)) throw SimulationError("duration and step must be positive");
    const long steps = std::lround(duration / dt);
    const Eigen::Index n = model.a.rows();
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(dx);
    const Eigen::VectorXd bu = model.b * du;
    for (long k = 0; k < steps; ++k) {
        // Matches the nonlinear loop: the input is in effect for a whole step
        // once its time has been reached.
        const double t = k * dt;
        const bool on = t >= t_step - 0.5 * dt;
        const auto f = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return on ? Eigen::VectorXd(model.a * z + bu) : Eigen::VectorXd(model.a * z);
        };
        dx = rk4_step(f, dx, dt);
        out.push_back(dx);
    }
    return out;
}

std::vector<double> linear_power(const LinearModel& model, const std::vector<Eigen::VectorXd>& dx) {
    const auto ph = physical_state(model.mode, model.equilibrium);
    const double p0 = power_outputs(ph.v_d, ph.v_q, ph.i_d, ph.i_q).p;
    const int id = model.mode == Mode::Gfl ? int{gfl_index::i_d} : int{gfm_index::i_d};
    const int iq = model.mode == Mode::Gfl ? int{gfl_index::i_q} : int{gfm_index::i_q};
    const int vd = model.mode == Mode::Gfl ? int{gfl_index::v_d} : int{gfm_index::v_d};
    const int vq = model.mode == Mode::Gfl ? int{gfl_index::v_q} : int{gfm_index::v_q};
    std::vector<double> p;
    p.reserve(dx.size());
    for (const auto& d : dx)
        p.push_back(p0 + ph.v_d * d[id] + ph.i_d * d[vd] + ph.v_q * d[iq] + ph.i_q * d[vq]);
    return p;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw SimulationError("rmse needs series of equal length");
    if (a.empty()) throw SimulationError("rmse needs non-empty series");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "stable";
        case Verdict::Sustained: return "sustained-oscillation";
        case Verdict::Divergent: return "unstable";
    }
    return "unknown";
}

namespace {

// RMS of the signal after removing its least-squares line.
// Below this the active power is at rest to rounding.
constexpr double kQuiescentRms = 1e-12;

double detrended_rms(const std::vector<double>& t, const std::vector<double>& y) {
    const double n = static_cast<double>(y.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        st += t[i];
        sy += y[i];
        stt += t[i] * t[i];
        sty += t[i] * y[i];
    }
    const double den = n * stt - st * st;
    const double slope = den != 0.0 ? (n * sty - st * sy) / den : 0.0;
    const double icpt = (sy - slope * st) / n;
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - (icpt + slope * t[i]);
        s += r * r;
    }
    return std::sqrt(s / n);
}

}  // namespace

ResponseAssessment assess_response(const SimulationResult& result, double t_from, double t_to,
                                   double tolerance, double window) {
    ResponseAssessment a;
    if (result.diverged && result.divergence_time < t_to) {
        a.verdict = Verdict::Divergent;
        a.growth_rate = std::numeric_limits<double>::infinity();
        return a;
    }
    // Detrended RMS per window, then a least-squares slope of its logarithm.
    std::vector<double> tw, lw;
    std::vector<double> t, y;
    std::size_t windows = 0;
    double start = t_from;
    for (const auto& r : result.trace) {
        if (r.t < t_from) continue;
        if (r.t >= t_to) break;
        if (r.t >= start + window) {
            if (y.size() > 4) {
                const double rms = detrended_rms(t, y);
                ++windows;
                if (rms > kQuiescentRms) {
                    tw.push_back(start + 0.5 * window);
                    lw.push_back(std::log(rms));
                }
            }
            t.clear();
            y.clear();
            start += window;
        }
        t.push_back(r.t);
        y.push_back(r.p);
    }
    if (windows < 2) throw SimulationError("trace too short to assess the response");
    // A signal at rest in (nearly) every window has nothing left to grow.
    if (tw.size() < 2) {
        a.growth_rate = -std::numeric_limits<double>::infinity();
        return a;
    }
    const double n = static_cast<double>(tw.size());
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        st += tw[i];
        sy += lw[i];
        stt += tw[i] * tw[i];
        sty += tw[i] * lw[i];
    }
    a.growth_rate = (n * sty - st * sy) / (n * stt - st * st);
    if (a.growth_rate > tolerance)
        a.verdict = Verdict::Divergent;
    else if (a.growth_rate >= -tolerance)
        a.verdict = Verdict::Sustained;
    else
        a.verdict = Verdict::Stable;
    return a;
}

void write_trace(std::ostream& out, const SimulationResult& result) {
    const auto old = out.precision(17);
    out << "t,sigma,P,Q,v_a,J_active,J_target\n";
    for (const auto& r : result.trace)
        out << r.t << ',' << static_cast<int>(r.sigma) << ',' << r.p << ',' << r.q << ',' << r.v_a
            << ',' << r.j_active << ',' << r.j_target << '\n';
    out.precision(old);
}

}  // namespace gridswitch
