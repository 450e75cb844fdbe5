#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/csi.hpp"
#include "gridswitch/linearization.hpp"
#include "gridswitch/model.hpp"

namespace gridswitch {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scripted change at a given time. `key` is any configuration key (absolute
/// set) or `step.<key>` (added to the current value).
struct ScenarioEvent {
    double time = 0.0;
    std::string key;
    double value = 0.0;
};

struct Scenario {
    std::string name;
    double duration = 1.0;  // s
    double dt = 20e-6;      // s
    Mode initial_mode = Mode::Gfl;
    std::vector<ScenarioEvent> events;  // strictly increasing times within [0, duration]

    void validate() const;
};

/// Applies one event to a configuration in place.
void apply_event(SystemConfig& cfg, const ScenarioEvent& ev);

struct NoSwitching {};

/// Traditional baseline: GFL while scr >= threshold, GFM otherwise.
struct ScrThreshold {
    double threshold = 3.5;
};

/// Offline CSI knowledge of one mode over the (scr, x_over_r) plane.
struct CsiModeContext {
    ParamSpace space;
    Region region;
    GmmModel model;
    NormalizationContext normalization;

    double evaluate(double scr, double x_over_r) const;
};

struct CsiBased {
    CsiWeights weights;
    double epsilon_h = 0.05;
    std::shared_ptr<const CsiModeContext> gfl;
    std::shared_ptr<const CsiModeContext> gfm;
};

using SwitchPolicy = std::variant<NoSwitching, ScrThreshold, CsiBased>;

std::string_view policy_name(const SwitchPolicy& policy);

/// One switching decision. For CsiBased the mode changes only when the target
/// index beats the active one by more than epsilon_h.
Mode decide_switch(const SwitchPolicy& policy, Mode sigma, double scr, double j_active,
                   double j_target);

/// Classical fourth-order Runge-Kutta step of the nonlinear model.
Eigen::VectorXd integrate(Mode mode, const Eigen::VectorXd& x, const SystemConfig& cfg, double dt);

/// Re-initializes the target mode so the physical state, the frame frequency
/// and the current and voltage references are continuous at the switch.
Eigen::VectorXd bumpless_transfer(Mode from, const Eigen::VectorXd& x, Mode to,
                                  const SystemConfig& cfg);

/// Frame frequency in p.u. (PLL output for GFL, VSG speed for GFM).
double frame_frequency(Mode mode, const Eigen::VectorXd& x, const SystemConfig& cfg);

struct TraceRecord {
    double t = 0.0;
    Mode sigma = Mode::Gfl;
    Eigen::VectorXd state;
    double p = 0.0;
    double q = 0.0;
    double v_a = 0.0;
    double j_active = std::numeric_limits<double>::quiet_NaN();
    double j_target = std::numeric_limits<double>::quiet_NaN();
};

struct SwitchEvent {
    double t = 0.0;
    Mode from = Mode::Gfl;
    Mode to = Mode::Gfm;
    double dp = 0.0;       // |P(t+) - P(t-)|
    double de_ref = 0.0;   // max |e_ref(t+) - e_ref(t-)| over d and q
    double di_ref = 0.0;   // max |i_Lref(t+) - i_Lref(t-)| over d and q
};

struct SimulationOptions {
    double policy_period = 1e-3;  // s
    double divergence_limit = 1e3;
    int record_every = 1;
};

struct SimulationResult {
    std::vector<TraceRecord> trace;
    std::vector<SwitchEvent> switches;
    bool diverged = false;
    double divergence_time = std::numeric_limits<double>::quiet_NaN();
};

/// Starts from the equilibrium of the initial mode and configuration.
SimulationResult simulate(const Scenario& scenario, const SwitchPolicy& policy,
                          const SystemConfig& cfg, const SimulationOptions& opts = {});

/// Same, from an explicit initial state.
SimulationResult simulate_from(const Scenario& scenario, const SwitchPolicy& policy,
                               const SystemConfig& cfg, const Eigen::VectorXd& x0,
                               const SimulationOptions& opts = {});

/// RK4 solution of dx = A x + B du with du applied from t_step on. Returns one
/// deviation vector per time sample k * dt, k = 0..round(duration / dt).
std::vector<Eigen::VectorXd> linear_response(const LinearModel& model, const Eigen::VectorXd& du,
                                             double t_step, double duration, double dt);

/// Active power reconstructed from the equilibrium plus the linearized deviation.
std::vector<double> linear_power(const LinearModel& model, const std::vector<Eigen::VectorXd>& dx);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

enum class Verdict { Stable, Sustained, Divergent };
std::string_view to_string(Verdict v);

struct ResponseAssessment {
    Verdict verdict = Verdict::Stable;
    double growth_rate = 0.0;  // 1/s, envelope of the detrended signal
};

/// Envelope growth of the detrended active power over [t_from, t_to). Traces
/// that hit the divergence limit inside the interval are divergent.
ResponseAssessment assess_response(const SimulationResult& result, double t_from,
                                   double t_to = std::numeric_limits<double>::infinity(),
                                   double tolerance = 0.25, double window = 0.1);

/// Rows: t, sigma, P, Q, v_a, J_active, J_target.
void write_trace(std::ostream& out, const SimulationResult& result);

}  // namespace gridswitch
