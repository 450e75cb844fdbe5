#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridswitch/sweep.hpp"

namespace gridswitch {

/// Region fitting precondition or geometry failure.
class RegionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Axis {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
};

/// Box-bounded parameter space with a margin oracle. Geometry runs in unit
/// coordinates (each axis mapped affinely onto [0, 1]).
class ParamSpace {
public:
    ParamSpace(std::vector<Axis> axes, MarginFn margin);

    int dim() const { return static_cast<int>(axes_.size()); }
    const std::vector<Axis>& axes() const { return axes_; }
    const MarginFn& margin_fn() const { return margin_; }

    Eigen::VectorXd to_unit(const Eigen::VectorXd& coords) const;
    Eigen::VectorXd from_unit(const Eigen::VectorXd& unit) const;
    std::optional<double> margin_at_unit(const Eigen::VectorXd& unit) const;
    /// Product of axis spans: converts unit-box volumes to parameter units.
    double volume_scale() const;
    bool same_axes(const std::vector<Axis>& other) const;

private:
    std::vector<Axis> axes_;
    MarginFn margin_;
};

struct BoundaryPoint {
    Eigen::VectorXd unit;
    Eigen::VectorXd coords;
    double rightmost_re = 0.0;  // -margin at the point
    int generation = 0;
    bool clipped = false;  // box edge reached while still stable
    bool in_band = true;   // -eps <= rightmost_re <= 0 holds
};

struct RayResult {
    bool found = false;  // false when the ray left the box while still stable
    BoundaryPoint point;
    int evaluations = 0;
};

struct RaySearchOptions {
    double epsilon = 0.01;
    double initial_step = 0.02;  // unit coordinates
    double growth = 1.6;
    double tolerance = 1e-4;     // bracket width, unit coordinates
    int max_bisections = 80;
};

/// Expands geometrically from `origin_unit` along `direction` until the margin
/// turns non-positive or the box edge is hit, then bisects the bracket. The
/// returned point is the stable end of the final bracket.
RayResult ray_boundary_search(const ParamSpace& space, const Eigen::VectorXd& origin_unit,
                              const Eigen::VectorXd& direction, const RaySearchOptions& opts = {},
                              int generation = 0);

struct Facet {
    std::vector<int> vertices;  // indices into Region::points, one per dimension
    Eigen::VectorXd normal;     // outward, unit coordinates
};

struct Region {
    std::vector<Axis> axes;
    Eigen::VectorXd origin;  // unit coordinates
    std::vector<BoundaryPoint> points;
    std::vector<Facet> facets;
    double volume_unit = 0.0;  // in the unit box
    double volume = 0.0;       // in parameter units
    std::vector<double> volume_history;
    int iterations = 0;
    int radial_fallbacks = 0;
    int evaluations = 0;

    int dim() const { return static_cast<int>(axes.size()); }
};

struct FitOptions {
    double epsilon = 0.01;
    double epsilon_r = 0.001;
    int max_iterations = 40;
    std::size_t max_facets = 20000;
    Exec exec = Exec::Parallel;
};

inline constexpr int kMaxRegionDim = 6;

/// Hyperplane-approximation fit of the stable region around `origin`
/// (parameter coordinates). Throws RegionError when the origin is not
/// strictly stable or the dimension exceeds kMaxRegionDim.
Region fit_sssr(const ParamSpace& space, const Eigen::VectorXd& origin,
                const FitOptions& opts = {});

/// Sum of |det[p_1 - o, ..., p_l - o]| / l! over facets, in unit coordinates.
double polytope_volume(const Region& region);
double polytope_volume(const Eigen::VectorXd& origin, const std::vector<Eigen::VectorXd>& points,
                       const std::vector<std::vector<int>>& facets);

/// Star containment about the origin (unit coordinates).
bool contains_unit(const Region& region, const Eigen::VectorXd& unit);
bool contains(const Region& region, const ParamSpace& space, const Eigen::VectorXd& coords);

/// Picks a deeply stable starting point on an n^l grid: among stable grid
/// points, the one farthest from any unstable or infeasible grid point.
std::optional<Eigen::VectorXd> find_origin(const ParamSpace& space, int n_per_axis,
                                           double epsilon = 0.01, Exec exec = Exec::Parallel);

struct IsmdSample {
    Eigen::VectorXd coords;
    double margin = 0.0;
};

struct IsmdResult {
    std::vector<IsmdSample> samples;
    std::size_t drawn = 0;   // candidates drawn from the bounding box
    std::size_t inside = 0;  // candidates inside the facet star
};

/// Uniform rejection sampling over the region's bounding box; keeps points
/// inside the star with positive margin. Deterministic for a given seed.
IsmdResult sample_ismd(const Region& region, const ParamSpace& space, std::size_t n_samples,
                       std::uint64_t seed, Exec exec = Exec::Parallel);

enum class UnionMembership { InsideSome, InsideNone };

UnionMembership region_union_probe(const std::vector<const Region*>& regions,
                                   const ParamSpace& space, const Eigen::VectorXd& coords);

/// Parameter-coordinate rows: coords..., rightmost_re, generation, clipped, in_band.
void write_region_points(std::ostream& out, const Region& region, const ParamSpace& space);
/// One facet per line as comma-separated point indices.
void write_region_facets(std::ostream& out, const Region& region);
void write_ismd(std::ostream& out, const std::vector<IsmdSample>& samples,
                const std::vector<Axis>& axes);

}  // namespace gridswitch
