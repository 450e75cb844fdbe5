#pragma once

#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/gmm.hpp"
#include "gridswitch/sssr.hpp"

namespace gridswitch {

class CsiError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsiWeights {
    double w_m = 0.4;
    double w_s = 0.3;
    double w_d = 0.3;

    /// Each weight in [0, 1] and the sum equal to 1 within 1e-12.
    void validate() const;
    /// Value reported for points outside the region: strictly below any
    /// attainable index.
    double insecure_value() const { return -w_s - 1.0; }
};

/// Euclidean distance from a point to an (l-1)-simplex given by its vertices.
double point_simplex_distance(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXd>& vertices);

/// Minimum distance to the fitted boundary, in unit-box coordinates. Throws
/// CsiError when the point is outside the region.
double boundary_distance(const Region& region, const Eigen::VectorXd& unit);

/// Relative width below which an indicator span is treated as flat.
inline constexpr double kFlatSpan = 1e-6;

struct Normalized {
    std::vector<double> values;
    bool degenerate = false;  // all inputs equal; every value mapped to 0.5
};

Normalized normalize_indicator(const std::vector<double>& values);

struct Span {
    double lo = 0.0;
    double hi = 0.0;
    /// Max-min scaling clamped to [0, 1]; a zero-width span maps to 0.5.
    double apply(double v) const;
};

/// Frozen spans from an offline map, reused for online evaluation.
struct NormalizationContext {
    Span margin;
    Span sensitivity;
    Span distance;
    CsiWeights weights;
};

struct CsiPoint {
    Eigen::VectorXd coords;
    double margin = 0.0;
    double sensitivity = 0.0;
    double distance = 0.0;
    double m_bar = 0.0;
    double s_bar = 0.0;
    double d_bar = 0.0;
    double j = 0.0;
};

struct CsiMap {
    std::vector<CsiPoint> points;
    std::size_t argmax_j = 0;
    std::size_t argmax_margin = 0;
    NormalizationContext context;
    bool degenerate = false;
};

/// Normalizes the raw indicators over the given points and scores them.
CsiMap assemble_csi(std::vector<CsiPoint> raw, const CsiWeights& weights);

/// Gradient norm of the regression with each component scaled by its axis span,
/// so sensitivities to axes with different units are comparable.
double sensitivity_norm(const GmmModel& model, const ParamSpace& space, const Eigen::VectorXd& coords);

/// Evaluates the index on a resolution x resolution grid over the box, keeping
/// points inside the region.
CsiMap csi_map(const Region& region, const ParamSpace& space, const GmmModel& model,
               int resolution, const CsiWeights& weights, Exec exec = Exec::Parallel);

/// Online index with frozen spans; outside the region returns weights.insecure_value().
double csi_at_operating_point(const Eigen::VectorXd& coords, const Region& region,
                              const ParamSpace& space, const GmmModel& model,
                              const NormalizationContext& context);

/// Rows: coords..., margin, sensitivity, distance, m_bar, s_bar, d_bar, j.
void write_csi_map(std::ostream& out, const CsiMap& map, const std::vector<Axis>& axes);
/// key = value summary: argmax points, spans and weights.
void write_csi_summary(std::ostream& out, const CsiMap& map, const std::vector<Axis>& axes);

}  // namespace gridswitch
