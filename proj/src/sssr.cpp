#include "gridswitch/sssr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gridswitch {

namespace {

double factorial(int l) {
    double f = 1.0;
    for (int k = 2; k <= l; ++k) f *= k;
    return f;
}

// Columns p_k - apex for the facet's vertices.
Eigen::MatrixXd edge_matrix(const std::vector<Eigen::VectorXd>& pts, const std::vector<int>& facet,
                            const Eigen::VectorXd& apex) {
    Eigen::MatrixXd m(apex.size(), static_cast<Eigen::Index>(facet.size()));
    for (std::size_t k = 0; k < facet.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = pts[facet[k]] - apex;
    return m;
}

double simplex_volume(const Eigen::MatrixXd& edges) {
    return std::abs(edges.determinant()) / factorial(static_cast<int>(edges.cols()));
}

// Barycentric cone coordinates of `v` in the facet's cone; nullopt when the
// facet is degenerate.
std::optional<Eigen::VectorXd> cone_coordinates(const Eigen::MatrixXd& edges,
                                                const Eigen::VectorXd& v) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
    if (!lu.isInvertible()) return std::nullopt;
    return Eigen::VectorXd(lu.solve(v));
}

constexpr double kConeSlack = 1e-9;

bool in_cone(const Eigen::MatrixXd& edges, const Eigen::VectorXd& v) {
    const auto lambda = cone_coordinates(edges, v);
    return lambda && lambda->minCoeff() >= -kConeSlack;
}

std::vector<Eigen::VectorXd> unit_points(const Region& r) {
    std::vector<Eigen::VectorXd> pts;
    pts.reserve(r.points.size());
    for (const auto& p : r.points) pts.push_back(p.unit);
    return pts;
}

Eigen::VectorXd outward_normal(const std::vector<Eigen::VectorXd>& pts,
                               const std::vector<int>& facet, const Eigen::VectorXd& origin) {
    const Eigen::Index l = origin.size();
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(l);
    for (int v : facet) centroid += pts[v];
    centroid /= static_cast<double>(facet.size());
    Eigen::VectorXd radial = centroid - origin;

    Eigen::VectorXd n;
    if (l == 1) {
        n = radial;
    } else {
        Eigen::MatrixXd m(l - 1, l);
        for (Eigen::Index k = 1; k < l; ++k) m.row(k - 1) = (pts[facet[k]] - pts[facet[0]]).transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const bool degenerate = sv.size() == 0 || sv[sv.size() - 1] <= 1e-12 * std::max(1.0, sv[0]);
        n = degenerate ? radial : Eigen::VectorXd(svd.matrixV().col(l - 1));
    }
    if (n.dot(radial) < 0.0) n = -n;
    const double norm = n.norm();
    return norm > 0.0 ? Eigen::VectorXd(n / norm) : n;
}

template <class Fn>
void for_each_index(std::size_t count, Exec exec, Fn&& fn) {
    const auto n = static_cast<long>(count);
    if (exec == Exec::Serial) {
        for (long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
        return;
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
}

}  // namespace

ParamSpace::ParamSpace(std::vector<Axis> axes, MarginFn margin)
    : axes_(std::move(axes)), margin_(std::move(margin)) {
    if (axes_.empty()) throw RegionError("parameter space needs at least one axis");
    for (const auto& a : axes_)
        if (!(a.lower < a.upper)) throw RegionError("axis '" + a.name + "' needs lower < upper");
    if (!margin_) throw RegionError("parameter space needs a margin callback");
}

Eigen::VectorXd ParamSpace::to_unit(const Eigen::VectorXd& coords) const {
    Eigen::VectorXd u(dim());
    for (int i = 0; i < dim(); ++i)
        u[i] = (coords[i] - axes_[i].lower) / (axes_[i].upper - axes_[i].lower);
    return u;
}

Eigen::VectorXd ParamSpace::from_unit(const Eigen::VectorXd& unit) const {
    Eigen::VectorXd c(dim());
    for (int i = 0; i < dim(); ++i)
        c[i] = axes_[i].lower + unit[i] * (axes_[i].upper - axes_[i].lower);
    return c;
}

std::optional<double> ParamSpace::margin_at_unit(const Eigen::VectorXd& unit) const {
    return margin_(from_unit(unit));
}

double ParamSpace::volume_scale() const {
    double s = 1.0;
    for (const auto& a : axes_) s *= a.upper - a.lower;
    return s;
}

bool ParamSpace::same_axes(const std::vector<Axis>& other) const {
    if (other.size() != axes_.size()) return false;
    for (std::size_t i = 0; i < axes_.size(); ++i)
        if (other[i].name != axes_[i].name || other[i].lower != axes_[i].lower ||
            other[i].upper != axes_[i].upper)
            return false;
    return true;
}

RayResult ray_boundary_search(const ParamSpace& space, const Eigen::VectorXd& origin_unit,
                              const Eigen::VectorXd& direction, const RaySearchOptions& opts,
                              int generation) {
    const double dnorm = direction.norm();
    if (!(dnorm > 0.0) || !std::isfinite(dnorm)) throw RegionError("search direction must be nonzero");
    const Eigen::VectorXd d = direction / dnorm;

    RayResult res;
    auto eval = [&](double t) {
        ++res.evaluations;
        return space.margin_at_unit(origin_unit + t * d);
    };
    auto make_point = [&](double t, double m) {
        BoundaryPoint p;
        p.unit = origin_unit + t * d;
        p.coords = space.from_unit(p.unit);
        p.rightmost_re = -m;
        p.generation = generation;
        p.in_band = m >= 0.0 && m <= opts.epsilon;
        return p;
    };

    const auto m0 = eval(0.0);
    if (!m0 || *m0 <= opts.epsilon)
        throw RegionError("ray origin is not strictly stable (margin must exceed epsilon)");

    double t_max = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) t_max = std::min(t_max, (1.0 - origin_unit[i]) / d[i]);
        if (d[i] < 0.0) t_max = std::min(t_max, -origin_unit[i] / d[i]);
    }
    t_max = std::max(t_max, 0.0);

    double t_lo = 0.0, m_lo = *m0;
    double t_hi = -1.0;
    double t = std::min(opts.initial_step, t_max);
    while (t_hi < 0.0) {
        if (t <= t_lo) {  // origin already sits on the box face
            res.point = make_point(t_lo, m_lo);
            res.point.clipped = true;
            return res;
        }
        const auto m = eval(t);
        if (!m || *m <= 0.0) {
            t_hi = t;
        } else {
            t_lo = t;
            m_lo = *m;
            if (t >= t_max) {
                res.point = make_point(t_lo, m_lo);
                res.point.clipped = true;
                return res;
            }
            t = std::min(t * opts.growth, t_max);
        }
    }

    // The margin band is the primary stopping rule; the bracket width only
    // ends the search once the stable end lies inside the band.
    for (int k = 0; k < opts.max_bisections && (t_hi - t_lo > opts.tolerance || m_lo > opts.epsilon);
         ++k) {
        const double mid = 0.5 * (t_lo + t_hi);
        const auto m = eval(mid);
        if (m && *m > 0.0) {
            t_lo = mid;
            m_lo = *m;
        } else {
            t_hi = mid;
        }
    }
    res.found = true;
    res.point = make_point(t_lo, m_lo);
    return res;
}

double polytope_volume(const Eigen::VectorXd& origin, const std::vector<Eigen::VectorXd>& points,
                       const std::vector<std::vector<int>>& facets) {
    double v = 0.0;
    for (const auto& f : facets) v += simplex_volume(edge_matrix(points, f, origin));
    return v;
}

double polytope_volume(const Region& region) {
    std::vector<std::vector<int>> facets;
    facets.reserve(region.facets.size());
    for (const auto& f : region.facets) facets.push_back(f.vertices);
    return polytope_volume(region.origin, unit_points(region), facets);
}

Region fit_sssr(const ParamSpace& space, const Eigen::VectorXd& origin, const FitOptions& opts) {
    const int l = space.dim();
    if (l > kMaxRegionDim)
        throw RegionError("region fitting supports at most " + std::to_string(kMaxRegionDim) +
                          " dimensions");
    if (origin.size() != l) throw RegionError("origin dimension does not match the space");

    Region region;
    region.axes = space.axes();
    region.origin = space.to_unit(origin);
    if (region.origin.minCoeff() < 0.0 || region.origin.maxCoeff() > 1.0)
        throw RegionError("origin lies outside the parameter box");
    const auto m0 = space.margin_at_unit(region.origin);
    if (!m0 || *m0 <= opts.epsilon)
        throw RegionError("origin is not strictly stable; choose a point with margin > epsilon");

    RaySearchOptions ray_opts;
    ray_opts.epsilon = opts.epsilon;

    // Steps 1-2: forward and backward rays along every axis.
    std::vector<RayResult> initial(2 * static_cast<std::size_t>(l));
    for_each_index(initial.size(), opts.exec, [&](std::size_t k) {
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(l);
        dir[static_cast<Eigen::Index>(k / 2)] = (k % 2 == 0) ? 1.0 : -1.0;
        initial[k] = ray_boundary_search(space, region.origin, dir, ray_opts, 0);
    });
    for (auto& r : initial) {
        region.evaluations += r.evaluations;
        region.points.push_back(std::move(r.point));
    }

    // Step 3: one simplex per orthant.
    std::vector<Eigen::VectorXd> pts = unit_points(region);
    std::vector<std::vector<int>> facets;
    for (unsigned mask = 0; mask < (1u << l); ++mask) {
        std::vector<int> f(l);
        for (int i = 0; i < l; ++i) f[i] = 2 * i + static_cast<int>((mask >> i) & 1u);
        facets.push_back(std::move(f));
    }
    std::vector<char> settled(facets.size(), 0);

    // Steps 4-6: refine until no candidate adds a significant cone volume.
    region.volume_unit = polytope_volume(region.origin, pts, facets);
    region.volume_history.push_back(region.volume_unit);
    const double fact = factorial(l);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < facets.size(); ++i)
            if (!settled[i]) active.push_back(i);
        if (active.empty()) break;

        struct Candidate {
            BoundaryPoint point;
            double cap = 0.0;
            bool radial = false;
            int evaluations = 0;
        };
        std::vector<Candidate> cand(active.size());
        const double volume = region.volume_unit;
        for_each_index(active.size(), opts.exec, [&](std::size_t a) {
            const auto& f = facets[active[a]];
            Candidate& c = cand[a];
            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(l);
            for (int v : f) centroid += pts[v];
            centroid /= static_cast<double>(l);
            const Eigen::MatrixXd edges = edge_matrix(pts, f, region.origin);

            bool have = false;
            const Eigen::VectorXd normal = outward_normal(pts, f, region.origin);
            const auto mc = space.margin_at_unit(centroid);
            ++c.evaluations;
            if (mc && *mc > opts.epsilon && normal.norm() > 0.0) {
                auto r = ray_boundary_search(space, centroid, normal, ray_opts, iter + 1);
                c.evaluations += r.evaluations;
                if (in_cone(edges, r.point.unit - region.origin)) {
                    c.point = std::move(r.point);
                    have = true;
                }
            }
            if (!have) {
                const Eigen::VectorXd dir = centroid - region.origin;
                if (dir.norm() <= 0.0) return;
                auto r = ray_boundary_search(space, region.origin, dir, ray_opts, iter + 1);
                c.evaluations += r.evaluations;
                c.point = std::move(r.point);
                c.radial = true;
            }
            c.cap = std::abs(edge_matrix(pts, f, c.point.unit).determinant()) / fact;
        });

        bool any = false;
        std::vector<std::vector<int>> next;
        std::vector<char> next_settled;
        std::vector<char> retained(facets.size(), 0);
        std::vector<int> new_index(facets.size(), -1);
        for (std::size_t a = 0; a < active.size(); ++a) {
            region.evaluations += cand[a].evaluations;
            if (cand[a].point.unit.size() == l && volume > 0.0 && cand[a].cap / volume > opts.epsilon_r) {
                if (cand[a].radial) ++region.radial_fallbacks;
                new_index[active[a]] = static_cast<int>(region.points.size());
                pts.push_back(cand[a].point.unit);
                region.points.push_back(std::move(cand[a].point));
                retained[active[a]] = 1;
                any = true;
            } else {
                settled[active[a]] = 1;
            }
        }
        for (std::size_t i = 0; i < facets.size(); ++i) {
            if (!retained[i]) {
                next.push_back(facets[i]);
                next_settled.push_back(settled[i]);
                continue;
            }
            for (int k = 0; k < l; ++k) {
                auto sub = facets[i];
                sub[k] = new_index[i];
                next.push_back(std::move(sub));
                next_settled.push_back(0);
            }
        }
        facets = std::move(next);
        settled = std::move(next_settled);
        region.volume_unit = polytope_volume(region.origin, pts, facets);
        region.volume_history.push_back(region.volume_unit);
        region.iterations = iter + 1;
        if (!any || facets.size() > opts.max_facets) break;
    }

    // Step 7: closed-form facet description.
    for (auto& f : facets) region.facets.push_back({f, outward_normal(pts, f, region.origin)});
    region.volume = region.volume_unit * space.volume_scale();
    return region;
}

bool contains_unit(const Region& region, const Eigen::VectorXd& unit) {
    const Eigen::VectorXd v = unit - region.origin;
    if (v.norm() == 0.0) return true;
    const auto pts = unit_points(region);
    for (const auto& f : region.facets) {
        const auto lambda = cone_coordinates(edge_matrix(pts, f.vertices, region.origin), v);
        if (!lambda || lambda->minCoeff() < -kConeSlack) continue;
        return lambda->sum() <= 1.0 + kConeSlack;
    }
    return false;
}

bool contains(const Region& region, const ParamSpace& space, const Eigen::VectorXd& coords) {
    return contains_unit(region, space.to_unit(coords));
}

std::optional<Eigen::VectorXd> find_origin(const ParamSpace& space, int n_per_axis, double epsilon,
                                           Exec exec) {
    const int l = space.dim();
    if (n_per_axis < 2) throw RegionError("origin search needs at least 2 points per axis");
    std::size_t total = 1;
    for (int i = 0; i < l; ++i) total *= static_cast<std::size_t>(n_per_axis);

    std::vector<Eigen::VectorXd> units(total, Eigen::VectorXd(l));
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t rem = k;
        for (int i = l - 1; i >= 0; --i) {
            units[k][i] = (static_cast<double>(rem % n_per_axis) + 0.5) / n_per_axis;
            rem /= n_per_axis;
        }
    }
    std::vector<Eigen::VectorXd> coords;
    for (const auto& u : units) coords.push_back(space.from_unit(u));
    const auto margins = evaluate_margins(space.margin_fn(), coords, exec);

    std::optional<std::size_t> best;
    double best_dist = -1.0, best_margin = -1.0;
    for (std::size_t k = 0; k < total; ++k) {
        if (!margins[k] || *margins[k] <= epsilon) continue;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < total; ++j)
            if (!margins[j] || *margins[j] <= epsilon) dist = std::min(dist, (units[k] - units[j]).norm());
        if (!std::isfinite(dist)) dist = 1.0 - 2.0 * (units[k].array() - 0.5).abs().maxCoeff();
        if (dist > best_dist + 1e-12 || (std::abs(dist - best_dist) <= 1e-12 && *margins[k] > best_margin)) {
            best = k;
            best_dist = dist;
            best_margin = *margins[k];
        }
    }
    if (!best) return std::nullopt;
    return coords[*best];
}

IsmdResult sample_ismd(const Region& region, const ParamSpace& space, std::size_t n_samples,
                       std::uint64_t seed, Exec exec) {
    if (n_samples == 0) throw RegionError("ISMD sampling needs at least one sample");
    if (!space.same_axes(region.axes)) throw RegionError("region and space axes differ");
    const int l = region.dim();
    Eigen::VectorXd lo = region.origin, hi = region.origin;
    for (const auto& p : region.points) {
        lo = lo.cwiseMin(p.unit);
        hi = hi.cwiseMax(p.unit);
    }

    IsmdResult res;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const std::size_t batch = std::max<std::size_t>(n_samples, 1000);
    while (res.samples.size() < n_samples) {
        std::vector<Eigen::VectorXd> inside;
        for (std::size_t k = 0; k < batch; ++k) {
            Eigen::VectorXd u(l);
            for (int i = 0; i < l; ++i) u[i] = lo[i] + (hi[i] - lo[i]) * uni(rng);
            ++res.drawn;
            if (contains_unit(region, u)) inside.push_back(space.from_unit(u));
        }
        res.inside += inside.size();
        const auto margins = evaluate_margins(space.margin_fn(), inside, exec);
        for (std::size_t k = 0; k < inside.size() && res.samples.size() < n_samples; ++k)
            if (margins[k] && *margins[k] > 0.0) res.samples.push_back({inside[k], *margins[k]});
        const double ratio = static_cast<double>(res.samples.size()) / static_cast<double>(res.drawn);
        if (res.samples.size() < n_samples && res.drawn >= 10 * batch && ratio < 1e-3)
            throw RegionError("ISMD acceptance ratio below 1e-3; the sampling box does not match the region");
    }
    return res;
}

UnionMembership region_union_probe(const std::vector<const Region*>& regions,
                                   const ParamSpace& space, const Eigen::VectorXd& coords) {
    for (const Region* r : regions)
        if (!space.same_axes(r->axes)) throw RegionError("regions are defined over different spaces");
    for (const Region* r : regions)
        if (contains(*r, space, coords)) return UnionMembership::InsideSome;
    return UnionMembership::InsideNone;
}

void write_region_points(std::ostream& out, const Region& region, const ParamSpace& space) {
    const auto old = out.precision(17);
    for (const auto& a : region.axes) out << a.name << ',';
    out << "rightmost_re,generation,clipped,in_band\n";
    for (const auto& p : region.points) {
        const Eigen::VectorXd c = space.from_unit(p.unit);
        for (Eigen::Index i = 0; i < c.size(); ++i) out << c[i] << ',';
        out << p.rightmost_re << ',' << p.generation << ',' << p.clipped << ',' << p.in_band << '\n';
    }
    out.precision(old);
}

void write_region_facets(std::ostream& out, const Region& region) {
    for (const auto& f : region.facets) {
        for (std::size_t k = 0; k < f.vertices.size(); ++k) out << (k ? "," : "") << f.vertices[k];
        out << '\n';
    }
}

void write_ismd(std::ostream& out, const std::vector<IsmdSample>& samples,
                const std::vector<Axis>& axes) {
    const auto old = out.precision(17);
    for (const auto& a : axes) out << a.name << ',';
    out << "margin\n";
    for (const auto& s : samples) {
        for (Eigen::Index i = 0; i < s.coords.size(); ++i) out << s.coords[i] << ',';
        out << s.margin << '\n';
    }
    out.precision(old);
}

}  // namespace gridswitch
