#include "gridswitch/csi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridswitch {

void CsiWeights::validate() const {
    for (double w : {w_m, w_s, w_d})
        if (!(w >= 0.0 && w <= 1.0)) throw CsiError("CSI weights must lie in [0, 1]");
    if (std::abs(w_m + w_s + w_d - 1.0) > 1e-12) throw CsiError("CSI weights must sum to 1");
}

double point_simplex_distance(const Eigen::VectorXd& p, const std::vector<Eigen::VectorXd>& vertices) {
    if (vertices.empty()) throw CsiError("simplex needs at least one vertex");
    if (vertices.size() == 1) return (p - vertices[0]).norm();

    // Project onto the affine hull; accept when the projection lands inside,
    // otherwise recurse over the faces.
    const Eigen::Index m = static_cast<Eigen::Index>(vertices.size()) - 1;
    Eigen::MatrixXd e(p.size(), m);
    for (Eigen::Index k = 0; k < m; ++k) e.col(k) = vertices[k + 1] - vertices[0];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
    if (qr.rank() == m) {
        const Eigen::VectorXd c = qr.solve(Eigen::VectorXd(p - vertices[0]));
        if (c.minCoeff() >= 0.0 && c.sum() <= 1.0) return (vertices[0] + e * c - p).norm();
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t drop = 0; drop < vertices.size(); ++drop) {
        std::vector<Eigen::VectorXd> face;
        for (std::size_t k = 0; k < vertices.size(); ++k)
            if (k != drop) face.push_back(vertices[k]);
        best = std::min(best, point_simplex_distance(p, face));
    }
    return best;
}

double boundary_distance(const Region& region, const Eigen::VectorXd& unit) {
    if (!contains_unit(region, unit)) throw CsiError("point lies outside the region");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : region.facets) {
        std::vector<Eigen::VectorXd> verts;
        for (int v : f.vertices) verts.push_back(region.points[v].unit);
        best = std::min(best, point_simplex_distance(unit, verts));
    }
    return best;
}

Normalized normalize_indicator(const std::vector<double>& values) {
    Normalized out;
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const Span span{*lo, *hi};
    out.degenerate = !(span.hi > span.lo);
    out.values.reserve(values.size());
    for (double v : values) out.values.push_back(span.apply(v));
    return out;
}

double Span::apply(double v) const {
    if (!(hi > lo)) return 0.5;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

namespace {

double score(const CsiWeights& w, double m, double s, double d) { return w.w_m * m - w.w_s * s + w.w_d * d; }

Span span_of(const std::vector<CsiPoint>& pts, double CsiPoint::*field) {
    Span s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& p : pts) {
        s.lo = std::min(s.lo, p.*field);
        s.hi = std::max(s.hi, p.*field);
    }
    return s;
}

}  // namespace

CsiMap assemble_csi(std::vector<CsiPoint> raw, const CsiWeights& weights) {
    weights.validate();
    if (raw.empty()) throw CsiError("no evaluation points inside the region");
    CsiMap map;
    map.context.weights = weights;
    map.context.margin = span_of(raw, &CsiPoint::margin);
    map.context.sensitivity = span_of(raw, &CsiPoint::sensitivity);
    map.context.distance = span_of(raw, &CsiPoint::distance);
    // A span narrower than the regression's own noise carries no ranking
    // information; collapse it so it maps to 0.5 instead of amplifying noise.
    // Margin and span-scaled sensitivity share the margin's units.
    const double scale = std::max(std::abs(map.context.margin.lo), std::abs(map.context.margin.hi));
    for (Span* s : {&map.context.margin, &map.context.sensitivity})
        if (s->hi - s->lo <= kFlatSpan * scale) s->hi = s->lo;
    if (map.context.distance.hi - map.context.distance.lo <= kFlatSpan) map.context.distance.hi = map.context.distance.lo;
    for (const Span* s : {&map.context.margin, &map.context.sensitivity, &map.context.distance})
        map.degenerate = map.degenerate || !(s->hi > s->lo);

    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& p = raw[i];
        p.m_bar = map.context.margin.apply(p.margin);
        p.s_bar = map.context.sensitivity.apply(p.sensitivity);
        p.d_bar = map.context.distance.apply(p.distance);
        p.j = score(weights, p.m_bar, p.s_bar, p.d_bar);
        if (p.j > raw[map.argmax_j].j) map.argmax_j = i;
        if (p.margin > raw[map.argmax_margin].margin) map.argmax_margin = i;
    }
    map.points = std::move(raw);
    return map;
}

double sensitivity_norm(const GmmModel& model, const ParamSpace& space, const Eigen::VectorXd& coords) {
    Eigen::VectorXd g = margin_gradient(model, coords);
    for (int i = 0; i < space.dim(); ++i) g[i] *= space.axes()[i].upper - space.axes()[i].lower;
    return g.norm();
}

CsiMap csi_map(const Region& region, const ParamSpace& space, const GmmModel& model,
               int resolution, const CsiWeights& weights, Exec exec) {
    weights.validate();
    if (space.dim() != 2) throw CsiError("CSI maps are defined on two-dimensional planes");
    if (model.input_dim() != space.dim()) throw CsiError("regression and region dimensions differ");
    if (resolution < 2) throw CsiError("grid resolution must be at least 2");

    std::vector<Eigen::VectorXd> inside;
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j) {
            const Eigen::Vector2d u(static_cast<double>(i) / (resolution - 1),
                                    static_cast<double>(j) / (resolution - 1));
            if (contains_unit(region, u)) inside.push_back(u);
        }
    std::vector<CsiPoint> raw(inside.size());
    const auto n = static_cast<long>(inside.size());
    auto eval = [&](long k) {
        CsiPoint& p = raw[k];
        p.coords = space.from_unit(inside[k]);
        p.margin = predict_margin(model, p.coords);
        p.sensitivity = sensitivity_norm(model, space, p.coords);
        p.distance = boundary_distance(region, inside[k]);
    };
    if (exec == Exec::Serial) {
        for (long k = 0; k < n; ++k) eval(k);
    } else {
#pragma omp parallel for schedule(static)
        for (long k = 0; k < n; ++k) eval(k);
    }
    return assemble_csi(std::move(raw), weights);
}

double csi_at_operating_point(const Eigen::VectorXd& coords, const Region& region,
                              const ParamSpace& space, const GmmModel& model,
                              const NormalizationContext& ctx) {
    ctx.weights.validate();
    const Eigen::VectorXd u = space.to_unit(coords);
    if (!contains_unit(region, u)) return ctx.weights.insecure_value();
    const double m = ctx.margin.apply(predict_margin(model, coords));
    const double s = ctx.sensitivity.apply(sensitivity_norm(model, space, coords));
    const double d = ctx.distance.apply(boundary_distance(region, u));
    return score(ctx.weights, m, s, d);
}

void write_csi_map(std::ostream& out, const CsiMap& map, const std::vector<Axis>& axes) {
    const auto old = out.precision(17);
    for (const auto& a : axes) out << a.name << ',';
    out << "margin,sensitivity,distance,m_bar,s_bar,d_bar,j\n";
    for (const auto& p : map.points) {
        for (Eigen::Index i = 0; i < p.coords.size(); ++i) out << p.coords[i] << ',';
        out << p.margin << ',' << p.sensitivity << ',' << p.distance << ',' << p.m_bar << ','
            << p.s_bar << ',' << p.d_bar << ',' << p.j << '\n';
    }
    out.precision(old);
}

void write_csi_summary(std::ostream& out, const CsiMap& map, const std::vector<Axis>& axes) {
    const auto old = out.precision(17);
    auto point = [&](const char* tag, const CsiPoint& p) {
        for (std::size_t i = 0; i < axes.size(); ++i)
            out << tag << '.' << axes[i].name << " = " << p.coords[static_cast<Eigen::Index>(i)] << '\n';
        out << tag << ".j = " << p.j << '\n' << tag << ".margin = " << p.margin << '\n';
    };
    point("argmax_j", map.points[map.argmax_j]);
    point("argmax_margin", map.points[map.argmax_margin]);
    out << "distinct_optima = " << (map.argmax_j != map.argmax_margin) << '\n';
    const auto& c = map.context;
    out << "span.margin = " << c.margin.lo << ", " << c.margin.hi << '\n'
        << "span.sensitivity = " << c.sensitivity.lo << ", " << c.sensitivity.hi << '\n'
        << "span.distance = " << c.distance.lo << ", " << c.distance.hi << '\n'
        << "weights = " << c.weights.w_m << ", " << c.weights.w_s << ", " << c.weights.w_d << '\n'
        << "points = " << map.points.size() << '\n';
    out.precision(old);
}

}  // namespace gridswitch
