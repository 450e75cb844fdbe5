#include "gridswitch/pipeline.hpp"

#include <cmath>

namespace gridswitch {

void ismd_dataset(const std::vector<IsmdSample>& samples, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    const Eigen::Index d = n ? samples.front().coords.size() : 0;
    x.resize(n, d);
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = samples[i].coords.transpose();
        y[i] = samples[i].margin;
    }
}

PlaneAnalysis analyze_plane(const PlanePreset& plane, const SystemConfig& cfg, const PlaneOptions& opts,
                            const std::optional<Eigen::VectorXd>& origin) {
    ParamSpace space = make_space(plane, cfg);
    Eigen::VectorXd o;
    if (origin) {
        o = *origin;
    } else {
        const auto found = find_origin(space, opts.origin_grid, opts.fit.epsilon, opts.fit.exec);
        if (!found) throw RegionError("no stable point found on the " + plane.name + " plane");
        o = *found;
    }
    Region region = fit_sssr(space, o, opts.fit);
    IsmdResult ismd = sample_ismd(region, space, opts.samples, opts.seed, opts.fit.exec);

    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    ismd_dataset(ismd.samples, x, y);
    KSelection sel = select_k(x, y, opts.k_max, opts.seed, opts.restarts);
    const double r2 = r_squared(sel.model, x, y);

    double r2_holdout = 0.0;
    if (opts.holdout > 1) {
        const auto held = sample_ismd(region, space, opts.holdout, opts.seed ^ 0x9e3779b97f4a7c15ULL,
                                      opts.fit.exec);
        Eigen::MatrixXd hx;
        Eigen::VectorXd hy;
        ismd_dataset(held.samples, hx, hy);
        r2_holdout = r_squared(sel.model, hx, hy);
    }

    std::optional<CsiMap> map;
    if (space.dim() == 2)
        map = csi_map(region, space, sel.model, opts.resolution, opts.weights, opts.fit.exec);
    return PlaneAnalysis{std::move(space), o, std::move(region), std::move(ismd), std::move(sel),
                         r2, r2_holdout, std::move(map)};
}

std::shared_ptr<const CsiModeContext> build_csi_context(Mode mode, const SystemConfig& cfg,
                                                        const PlaneOptions& opts) {
    const PlanePreset& plane = plane_preset(mode == Mode::Gfl ? "gfl-scr-xr" : "gfm-scr-xr");
    PlaneOptions o = opts;
    o.holdout = 0;
    auto a = analyze_plane(plane, cfg, o);
    return std::make_shared<const CsiModeContext>(
        CsiModeContext{std::move(a.space), std::move(a.region), std::move(a.gmm.model), a.map->context});
}

int flat_sign(double slope, double axis_span, double margin_scale) {
    if (std::abs(slope * axis_span) <= kFlatSpan * std::abs(margin_scale)) return 0;
    return slope > 0.0 ? 1 : -1;
}

SweepResult run_sweep(const SweepSpec& spec, const ParamSpace& space, const Region& region,
                      const GmmModel& model, int n_points) {
    if (n_points < 2) throw ConfigError("a sweep needs at least two points");
    int ax = -1;
    int fixed = -1;
    for (int i = 0; i < space.dim(); ++i) {
        if (space.axes()[i].name == spec.axis) ax = i;
        if (space.axes()[i].name == spec.fixed_axis) fixed = i;
    }
    if (space.dim() != 2 || ax < 0 || fixed < 0 || ax == fixed)
        throw ConfigError("sweep axes '" + spec.axis + "', '" + spec.fixed_axis + "' do not span the plane");

    const Axis& a = space.axes()[ax];
    const double span = a.upper - a.lower;
    const double h = 1e-3 * span;
    SweepResult out{spec, ax, {}, 0, 0, 0.0};
    for (int k = 0; k < n_points; ++k) {
        SweepPoint pt;
        pt.coords = Eigen::VectorXd(2);
        pt.coords[ax] = spec.from + (spec.to - spec.from) * k / (n_points - 1);
        pt.coords[fixed] = spec.fixed_value;
        const Eigen::VectorXd u = space.to_unit(pt.coords);
        const bool in_box = (u.array() >= 0.0).all() && (u.array() <= 1.0).all();
        pt.inside = in_box && contains_unit(region, u);
        if (pt.inside) {
            Eigen::VectorXd up = pt.coords, dn = pt.coords;
            up[ax] += h;
            dn[ax] -= h;
            const auto m0 = space.margin_at_unit(u);
            const auto mp = space.margin_at_unit(space.to_unit(up));
            const auto mm = space.margin_at_unit(space.to_unit(dn));
            if (!m0 || !mp || !mm) {
                pt.inside = false;
            } else {
                pt.margin = *m0;
                pt.true_slope = (*mp - *mm) / (2.0 * h);
                pt.model_slope = margin_gradient(model, pt.coords)[ax];
                pt.agree = flat_sign(pt.true_slope, span, pt.margin) ==
                           flat_sign(pt.model_slope, span, pt.margin);
                ++out.inside;
                out.agree += pt.agree ? 1 : 0;
                out.mean_abs_model_slope += std::abs(pt.model_slope);
            }
        }
        out.points.push_back(std::move(pt));
    }
    if (out.inside > 0) out.mean_abs_model_slope /= out.inside;
    return out;
}

void write_sweep(std::ostream& out, const SweepResult& sweep) {
    const auto old = out.precision(17);
    out << sweep.spec.axis << ",inside,margin,true_slope,model_slope,agree\n";
    for (const auto& p : sweep.points) {
        out << p.coords[sweep.axis_index] << ',' << int{p.inside} << ',' << p.margin << ',' << p.true_slope << ','
            << p.model_slope << ',' << int{p.agree} << '\n';
    }
    out.precision(old);
}

}  // namespace gridswitch
