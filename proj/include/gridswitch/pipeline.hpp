#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "gridswitch/csi.hpp"
#include "gridswitch/gmm.hpp"
#include "gridswitch/presets.hpp"
#include "gridswitch/scenario_io.hpp"
#include "gridswitch/simulation.hpp"
#include "gridswitch/sssr.hpp"

namespace gridswitch {

struct PlaneOptions {
    std::size_t samples = 5000;
    std::size_t holdout = 200;
    int k_max = 10;
    int restarts = 5;
    int resolution = 60;
    int origin_grid = 12;
    CsiWeights weights;
    std::uint64_t seed = 1;
    FitOptions fit;
};

/// Region, ISMD, regression and CSI map of one plane.
struct PlaneAnalysis {
    ParamSpace space;
    Eigen::VectorXd origin;
    Region region;
    IsmdResult ismd;
    KSelection gmm;
    double r2 = 0.0;
    double r2_holdout = 0.0;
    std::optional<CsiMap> map;  // set when the plane is two-dimensional
};

/// ISMD samples as an (n x d) design matrix and margin vector.
void ismd_dataset(const std::vector<IsmdSample>& samples, Eigen::MatrixXd& x, Eigen::VectorXd& y);

/// Fits the region (origin chosen on a grid unless given), samples the ISMD,
/// selects and fits the mixture and evaluates the CSI map.
PlaneAnalysis analyze_plane(const PlanePreset& plane, const SystemConfig& cfg, const PlaneOptions& opts,
                            const std::optional<Eigen::VectorXd>& origin = std::nullopt);

/// Offline CSI knowledge of one mode on its (scr, x_over_r) plane.
std::shared_ptr<const CsiModeContext> build_csi_context(Mode mode, const SystemConfig& cfg,
                                                        const PlaneOptions& opts);

/// Sign with a dead band: slopes whose effect across the axis span is below
/// kFlatSpan of the margin scale count as zero.
int flat_sign(double slope, double axis_span, double margin_scale);

struct SweepPoint {
    Eigen::VectorXd coords;
    bool inside = false;
    double margin = 0.0;       // exact margin
    double true_slope = 0.0;   // central difference of the exact margin
    double model_slope = 0.0;  // regression gradient component
    bool agree = false;
};

struct SweepResult {
    SweepSpec spec;
    int axis_index = 0;  // swept coordinate within the plane
    std::vector<SweepPoint> points;
    int inside = 0;
    int agree = 0;
    double mean_abs_model_slope = 0.0;  // over inside points
};

/// Walks one axis of a fitted plane with the other axis fixed and compares the
/// regression gradient sign with the exact margin's finite-difference sign at
/// the points inside the region. Points outside the box are skipped.
SweepResult run_sweep(const SweepSpec& spec, const ParamSpace& space, const Region& region,
                      const GmmModel& model, int n_points);

/// Rows: axis value, inside, margin, true_slope, model_slope, agree.
void write_sweep(std::ostream& out, const SweepResult& sweep);

}  // namespace gridswitch
