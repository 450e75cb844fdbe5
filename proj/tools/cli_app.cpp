#include "cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "gridswitch/config.hpp"
#include "gridswitch/csi.hpp"
#include "gridswitch/equilibrium.hpp"
#include "gridswitch/gmm.hpp"
#include "gridswitch/linearization.hpp"
#include "gridswitch/pipeline.hpp"
#include "gridswitch/presets.hpp"
#include "gridswitch/scenario_io.hpp"
#include "gridswitch/simulation.hpp"
#include "gridswitch/sssr.hpp"
#include "gridswitch/sweep.hpp"

#ifndef GRIDSWITCH_SCENARIO_DIR
#define GRIDSWITCH_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;

namespace gridswitch::cli {

namespace {

/// Failure inside a numerical stage, reported with the stage name.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what) {}
};

struct Common {
    std::string config;
    std::string scenario;
    std::vector<std::string> sets;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    std::string mode;
    std::string plane;
    std::vector<std::string> axes;
    std::string origin;
    std::string policy;
    std::string self_test;
};

/// Everything a command needs after configuration has been resolved.
struct Session {
    SystemConfig cfg;
    RunFile run;
    std::uint64_t seed = 1;
    fs::path out;
    const Common* flags = nullptr;
};

std::string resolve_scenario(const std::string& name) {
    if (fs::exists(name)) return name;
    const fs::path shipped = fs::path(GRIDSWITCH_SCENARIO_DIR) / (name + ".run");
    if (fs::exists(shipped)) return shipped.string();
    throw ConfigError("scenario '" + name + "' not found (looked in " GRIDSWITCH_SCENARIO_DIR ")");
}

Session open_session(const Common& c) {
    Session s;
    s.flags = &c;
    s.cfg = c.config.empty() ? SystemConfig{} : load_config(c.config);
    if (!c.scenario.empty()) s.run = read_run_file(resolve_scenario(c.scenario));

    for (const auto& item : c.sets) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
        std::istringstream line(item);
        const auto kv = read_key_values(line);
        if (kv.size() != 1) throw ConfigError("--set expects key=value, got '" + item + "'");
        const auto& opts = run_option_keys();
        if (is_parameter_key(kv[0].key)) {
            parse_number(kv[0]);
            s.run.overrides.push_back(kv[0]);
        } else if (std::find(opts.begin(), opts.end(), kv[0].key) != opts.end()) {
            s.run.options[kv[0].key] = kv[0].value;
        } else {
            throw ConfigError("unknown key '" + kv[0].key + "'");
        }
    }
    s.cfg = apply_run_overrides(s.cfg, s.run);
    s.seed = c.seed ? *c.seed : static_cast<std::uint64_t>(s.run.number("seed", 1.0));
    if (c.jobs > 0) set_jobs(c.jobs);
    s.out = c.out;
    fs::create_directories(s.out);
    return s;
}

std::ofstream open_out(const Session& s, const std::string& name) {
    std::ofstream f(s.out / name);
    if (!f) throw ConfigError("cannot write '" + (s.out / name).string() + "'");
    f.precision(17);
    return f;
}

Mode session_mode(const Session& s) {
    const std::string text = !s.flags->mode.empty() ? s.flags->mode : s.run.get("mode", s.run.get("initial_mode", "gfl"));
    try {
        return parse_mode(text);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

CsiWeights session_weights(const Session& s) {
    CsiWeights w;
    if (s.run.has("weights")) {
        const auto v = s.run.numbers("weights");
        if (v.size() != 3) throw ConfigError("weights needs three values");
        w = {v[0], v[1], v[2]};
    }
    try {
        w.validate();
    } catch (const CsiError& e) {
        throw ConfigError(e.what());
    }
    return w;
}

PlaneOptions plane_options(const Session& s) {
    PlaneOptions o;
    o.samples = static_cast<std::size_t>(s.run.number("samples", static_cast<double>(o.samples)));
    o.holdout = static_cast<std::size_t>(s.run.number("holdout", static_cast<double>(o.holdout)));
    o.k_max = static_cast<int>(s.run.number("k_max", o.k_max));
    o.restarts = static_cast<int>(s.run.number("restarts", o.restarts));
    o.resolution = static_cast<int>(s.run.number("resolution", o.resolution));
    o.weights = session_weights(s);
    o.seed = s.seed;
    o.fit.epsilon = s.run.number("epsilon", o.fit.epsilon);
    o.fit.epsilon_r = s.run.number("epsilon_r", o.fit.epsilon_r);
    if (o.samples < 1 || o.k_max < 1 || o.restarts < 1 || o.resolution < 2)
        throw ConfigError("samples, k_max and restarts must be positive and resolution at least 2");
    return o;
}

/// Plane from --axis flags (with the session mode) or from a named preset.
PlanePreset session_plane(const Session& s) {
    if (!s.flags->axes.empty()) {
        PlanePreset p{"custom", session_mode(s), {}};
        for (const auto& spec : s.flags->axes) {
            std::string text = spec;
            std::replace(text.begin(), text.end(), ':', ',');
            const auto parts = split_list(text);
            if (parts.size() != 3) throw ConfigError("--axis expects name:lower:upper, got '" + spec + "'");
            if (!is_parameter_key(parts[0])) throw ConfigError("unknown parameter '" + parts[0] + "'");
            const double lo = parse_number({parts[0], parts[1], 0});
            const double hi = parse_number({parts[0], parts[2], 0});
            if (!(hi > lo)) throw ConfigError("axis '" + parts[0] + "' needs lower < upper");
            p.axes.push_back({parts[0], lo, hi});
        }
        return p;
    }
    const std::string name = !s.flags->plane.empty() ? s.flags->plane : s.run.get("plane", "");
    if (name.empty()) throw ConfigError("no plane given (use --plane or --axis)");
    return plane_preset(name);
}

std::optional<Eigen::VectorXd> session_origin(const Session& s, int dim) {
    std::vector<double> v;
    if (!s.flags->origin.empty()) {
        for (const auto& item : split_list(s.flags->origin)) v.push_back(parse_number({"origin", item, 0}));
    } else if (s.run.has("origin")) {
        v = s.run.numbers("origin");
    } else {
        return std::nullopt;
    }
    if (static_cast<int>(v.size()) != dim)
        throw ConfigError("origin needs " + std::to_string(dim) + " values");
    return Eigen::Map<Eigen::VectorXd>(v.data(), dim);
}

void print_point(std::ostream& out, const std::string& tag, const Eigen::VectorXd& p,
                 const std::vector<Axis>& axes) {
    for (std::size_t i = 0; i < axes.size(); ++i)
        out << tag << '.' << axes[i].name << " = " << p[static_cast<Eigen::Index>(i)] << '\n';
}

struct FittedRegion {
    ParamSpace space;
    Eigen::VectorXd origin;
    Region region;
};

FittedRegion fit_region(const Session& s, const PlanePreset& plane, const PlaneOptions& opts) {
    if (static_cast<int>(plane.axes.size()) > kMaxRegionDim)
        throw ConfigError("region dimension " + std::to_string(plane.axes.size()) + " exceeds the limit of " +
                          std::to_string(kMaxRegionDim));
    ParamSpace space = make_space(plane, s.cfg);
    auto origin = session_origin(s, space.dim());
    if (!origin) {
        origin = find_origin(space, opts.origin_grid, opts.fit.epsilon, opts.fit.exec);
        if (!origin) throw StageError("region", "no stable point on the search grid; give --origin");
    } else if (!space.margin_at_unit(space.to_unit(*origin)).has_value() ||
               *space.margin_at_unit(space.to_unit(*origin)) <= opts.fit.epsilon) {
        throw StageError("region", "origin is not strictly stable; choose a different --origin");
    }
    try {
        Region region = fit_sssr(space, *origin, opts.fit);
        return {std::move(space), *origin, std::move(region)};
    } catch (const RegionError& e) {
        throw StageError("region", e.what());
    }
}

void report_region(std::ostream& out, const FittedRegion& f) {
    out << "volume = " << f.region.volume << '\n'
        << "volume_unit = " << f.region.volume_unit << '\n'
        << "boundary_points = " << f.region.points.size() << '\n'
        << "facets = " << f.region.facets.size() << '\n'
        << "iterations = " << f.region.iterations << '\n';
    print_point(out, "origin", f.origin, f.space.axes());
}

// ---------------------------------------------------------------- commands

int cmd_equilibrium(const Session& s, std::ostream& out, std::ostream& err) {
    const Mode mode = session_mode(s);
    const auto eq = try_solve_equilibrium(mode, s.cfg);
    auto f = open_out(s, "equilibrium.txt");
    f << "mode = " << to_string(mode) << '\n'
      << "converged = " << int{eq.converged} << '\n'
      << "iterations = " << eq.iterations << '\n'
      << "residual = " << eq.residual_norm << '\n';
    const auto& names = state_names(mode);
    for (std::size_t i = 0; i < names.size(); ++i)
        f << "state." << names[i] << " = " << eq.state[static_cast<Eigen::Index>(i)] << '\n';
    if (!eq.converged) {
        const Eigen::VectorXd r = derivatives(mode, eq.state, s.cfg);
        Eigen::Index worst = 0;
        r.cwiseAbs().maxCoeff(&worst);
        err << "equilibrium did not converge: residual " << eq.residual_norm << " after " << eq.iterations
            << " iterations, largest in d(" << names[static_cast<std::size_t>(worst)] << ")/dt = " << r[worst]
            << '\n';
        return kNumerical;
    }
    const auto sig = control_signals(mode, eq.state, s.cfg);
    f << "p = " << sig.p << '\n' << "q = " << sig.q << '\n';
    out << "mode = " << to_string(mode) << '\n'
        << "iterations = " << eq.iterations << '\n'
        << "residual = " << eq.residual_norm << '\n'
        << "p = " << sig.p << '\n'
        << "q = " << sig.q << '\n';
    const auto& st = eq.state;
    const int vd = mode == Mode::Gfl ? int{gfl_index::v_d} : int{gfm_index::v_d};
    out << "v_d = " << st[vd] << '\n' << "v_q = " << st[vd + 1] << '\n';
    return kOk;
}

int cmd_eigen(const Session& s, std::ostream& out) {
    const Mode mode = session_mode(s);
    EquilibriumResult eq;
    try {
        eq = solve_equilibrium(mode, s.cfg);
    } catch (const EquilibriumError& e) {
        throw StageError("equilibrium", e.what());
    }
    const auto lm = linearize(mode, s.cfg, eq);
    const auto rep = stability_report(lm);
    {
        auto f = open_out(s, "eigenvalues.csv");
        f << "re,im\n";
        for (const auto& l : rep.eigenvalues) f << l.real() << ',' << l.imag() << '\n';
    }
    {
        auto f = open_out(s, "a.csv");
        write_matrix_csv(f, lm.a);
    }
    {
        auto f = open_out(s, "b.csv");
        write_matrix_csv(f, lm.b);
    }
    out << "mode = " << to_string(mode) << '\n'
        << "rightmost.re = " << rep.rightmost.real() << '\n'
        << "rightmost.im = " << rep.rightmost.imag() << '\n'
        << "margin = " << rep.signed_margin << '\n'
        << "classification = " << to_string(rep.classification) << '\n';
    return kOk;
}

int sssr_self_test(const Session& s, std::ostream& out) {
    if (s.flags->self_test != "disk") throw ConfigError("unknown self test '" + s.flags->self_test + "'");
    ParamSpace space({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}},
                     [](const Eigen::VectorXd& p) -> std::optional<double> { return 1.0 - p.norm(); });
    FitOptions fo;
    fo.epsilon_r = s.run.number("epsilon_r", fo.epsilon_r);
    const Region r = fit_sssr(space, Eigen::Vector2d::Zero(), fo);
    const double err = r.volume / std::numbers::pi - 1.0;
    {
        auto o = open_out(s, "region_points.csv");
        write_region_points(o, r, space);
    }
    {
        auto o = open_out(s, "region_facets.csv");
        write_region_facets(o, r);
    }
    out << "self_test = disk\n"
        << "area = " << r.volume << '\n'
        << "relative_error = " << err << '\n'
        << "boundary_points = " << r.points.size() << '\n';
    return std::abs(err) <= 0.02 ? kOk : kNumerical;
}

int cmd_sssr(const Session& s, std::ostream& out) {
    if (!s.flags->self_test.empty()) return sssr_self_test(s, out);
    const PlanePreset plane = session_plane(s);
    const auto opts = plane_options(s);
    const auto f = fit_region(s, plane, opts);
    {
        auto o = open_out(s, "region_points.csv");
        write_region_points(o, f.region, f.space);
    }
    {
        auto o = open_out(s, "region_facets.csv");
        write_region_facets(o, f.region);
    }
    report_region(out, f);
    // Axis-aligned rays from the origin, the first boundary estimates.
    const Eigen::VectorXd o_unit = f.space.to_unit(f.origin);
    RaySearchOptions ro;
    ro.epsilon = opts.fit.epsilon;
    for (int i = 0; i < f.space.dim(); ++i)
        for (int sign : {1, -1}) {
            Eigen::VectorXd dir = Eigen::VectorXd::Zero(f.space.dim());
            dir[i] = sign;
            const auto ray = ray_boundary_search(f.space, o_unit, dir, ro);
            out << "ray." << (sign > 0 ? '+' : '-') << f.space.axes()[static_cast<std::size_t>(i)].name << " = "
                << ray.point.coords[i] << (ray.found ? "" : "  # box edge") << '\n';
        }
    return kOk;
}

int cmd_ismd(const Session& s, std::ostream& out) {
    const PlanePreset plane = session_plane(s);
    const auto opts = plane_options(s);
    const auto f = fit_region(s, plane, opts);
    IsmdResult ismd;
    try {
        ismd = sample_ismd(f.region, f.space, opts.samples, opts.seed, opts.fit.exec);
    } catch (const RegionError& e) {
        throw StageError("ismd", e.what());
    }
    auto o = open_out(s, "ismd.csv");
    write_ismd(o, ismd.samples, f.space.axes());
    report_region(out, f);
    out << "samples = " << ismd.samples.size() << '\n'
        << "drawn = " << ismd.drawn << '\n'
        << "inside = " << ismd.inside << '\n';
    return kOk;
}

PlaneAnalysis staged_analysis(const Session& s, const PlanePreset& plane, const PlaneOptions& opts,
                              bool with_map) {
    auto f = fit_region(s, plane, opts);
    IsmdResult ismd;
    try {
        ismd = sample_ismd(f.region, f.space, opts.samples, opts.seed, opts.fit.exec);
    } catch (const RegionError& e) {
        throw StageError("ismd", e.what());
    }
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    ismd_dataset(ismd.samples, x, y);
    KSelection sel;
    double r2 = 0.0;
    double r2_holdout = 0.0;
    try {
        sel = select_k(x, y, opts.k_max, opts.seed, opts.restarts);
        r2 = r_squared(sel.model, x, y);
        if (opts.holdout > 1) {
            const auto held = sample_ismd(f.region, f.space, opts.holdout, opts.seed ^ 0x9e3779b97f4a7c15ULL,
                                          opts.fit.exec);
            Eigen::MatrixXd hx;
            Eigen::VectorXd hy;
            ismd_dataset(held.samples, hx, hy);
            r2_holdout = r_squared(sel.model, hx, hy);
        }
    } catch (const GmmError& e) {
        throw StageError("gmm", e.what());
    }
    std::optional<CsiMap> map;
    if (with_map) {
        try {
            map = csi_map(f.region, f.space, sel.model, opts.resolution, opts.weights, opts.fit.exec);
        } catch (const CsiError& e) {
            throw StageError("csi", e.what());
        }
    }
    return PlaneAnalysis{std::move(f.space), f.origin, std::move(f.region), std::move(ismd), std::move(sel),
                         r2, r2_holdout, std::move(map)};
}

void report_gmm(std::ostream& out, const PlaneAnalysis& a, const std::string& prefix) {
    out << prefix << "k = " << a.gmm.k << '\n'
        << prefix << "r2 = " << a.r2 << '\n'
        << prefix << "r2_holdout = " << a.r2_holdout << '\n';
}

int cmd_gmm(const Session& s, std::ostream& out) {
    const auto opts = plane_options(s);
    std::vector<SweepSpec> sweeps;
    for (const auto& text : s.run.sweeps) sweeps.push_back(parse_sweep(text));

    // Planes to fit: the explicit one, or one scr/x_over_r plane per swept mode.
    std::vector<PlanePreset> planes;
    if (!s.flags->plane.empty() || !s.flags->axes.empty() || s.run.has("plane")) {
        planes.push_back(session_plane(s));
    } else {
        std::set<Mode> modes;
        for (const auto& sw : sweeps) modes.insert(sw.mode);
        if (modes.empty()) throw ConfigError("no plane given (use --plane, --axis or sweeps)");
        for (Mode m : modes) planes.push_back(plane_preset(m == Mode::Gfl ? "gfl-scr-xr" : "gfm-scr-xr"));
    }

    const int n_points = static_cast<int>(s.run.number("sweep_points", 41));
    int inside = 0;
    int agree = 0;
    std::size_t sweep_no = 0;
    for (const auto& plane : planes) {
        const auto a = staged_analysis(s, plane, opts, false);
        const std::string tag = plane.name + ".";
        {
            auto o = open_out(s, "gmm_" + plane.name + ".txt");
            write_gmm(o, a.gmm.model);
        }
        {
            auto o = open_out(s, "ismd_" + plane.name + ".csv");
            write_ismd(o, a.ismd.samples, a.space.axes());
        }
        report_gmm(out, a, tag);
        for (std::size_t i = 0; i < sweeps.size(); ++i) {
            if (sweeps[i].mode != plane.mode) continue;
            SweepResult r;
            try {
                r = run_sweep(sweeps[i], a.space, a.region, a.gmm.model, n_points);
            } catch (const ConfigError&) {
                continue;  // sweep over another plane
            }
            ++sweep_no;
            auto o = open_out(s, "sweep_" + std::to_string(i + 1) + ".csv");
            write_sweep(o, r);
            out << "sweep." << i + 1 << " = " << to_string(r.spec.mode) << ' ' << r.spec.axis << " at "
                << r.spec.fixed_axis << '=' << r.spec.fixed_value << ": " << r.agree << '/' << r.inside
                << " signs agree, mean |slope| " << r.mean_abs_model_slope << '\n';
            inside += r.inside;
            agree += r.agree;
        }
    }
    if (sweep_no > 0)
        out << "sweep.agreement = " << (inside > 0 ? static_cast<double>(agree) / inside : 0.0) << '\n';
    return kOk;
}

void write_map_outputs(const Session& s, const PlaneAnalysis& a) {
    auto m = open_out(s, "csi_map.csv");
    write_csi_map(m, *a.map, a.space.axes());
    auto sum = open_out(s, "csi_summary.txt");
    write_csi_summary(sum, *a.map, a.space.axes());
}

void report_map(std::ostream& out, const PlaneAnalysis& a) {
    const auto& map = *a.map;
    const auto& j = map.points[map.argmax_j];
    const auto& m = map.points[map.argmax_margin];
    print_point(out, "argmax_j", j.coords, a.space.axes());
    out << "argmax_j.j = " << j.j << '\n';
    print_point(out, "argmax_margin", m.coords, a.space.axes());
    out << "argmax_margin.margin = " << m.margin << '\n'
        << "distinct_optima = " << int{map.argmax_j != map.argmax_margin} << '\n';
    if (map.degenerate) out << "warning = an indicator is flat over the map and was mapped to 0.5\n";
}

int cmd_csi(const Session& s, std::ostream& out) {
    const PlanePreset plane = session_plane(s);
    if (plane.axes.size() != 2) throw ConfigError("CSI maps need a two-parameter plane");
    const auto a = staged_analysis(s, plane, plane_options(s), true);
    write_map_outputs(s, a);
    report_map(out, a);
    return kOk;
}

int cmd_pipeline(const Session& s, std::ostream& out) {
    const PlanePreset plane = session_plane(s);
    const bool with_map = plane.axes.size() == 2;
    const auto a = staged_analysis(s, plane, plane_options(s), with_map);
    {
        auto o = open_out(s, "region_points.csv");
        write_region_points(o, a.region, a.space);
        auto fct = open_out(s, "region_facets.csv");
        write_region_facets(fct, a.region);
        auto is = open_out(s, "ismd.csv");
        write_ismd(is, a.ismd.samples, a.space.axes());
        auto g = open_out(s, "gmm.txt");
        write_gmm(g, a.gmm.model);
    }
    if (with_map) write_map_outputs(s, a);

    std::ostringstream summary;
    summary.precision(17);
    summary << "plane = " << plane.name << '\n'
            << "volume = " << a.region.volume << '\n'
            << "volume_unit = " << a.region.volume_unit << '\n'
            << "samples = " << a.ismd.samples.size() << '\n';
    report_gmm(summary, a, "");
    if (with_map) report_map(summary, a);
    auto f = open_out(s, "summary.txt");
    f << summary.str();
    out << summary.str();
    return kOk;
}

SwitchPolicy session_policy(const Session& s, const Scenario& sc) {
    const std::string name = !s.flags->policy.empty() ? s.flags->policy : s.run.get("policy", "none");
    if (name == "none") return NoSwitching{};
    if (name == "threshold") {
        const double th = s.run.number("threshold", ScrThreshold{}.threshold);
        if (!(th > 0.0)) throw ConfigError("threshold must be positive");
        return ScrThreshold{th};
    }
    if (name == "csi") {
        CsiBased p;
        p.weights = session_weights(s);
        p.epsilon_h = s.run.number("epsilon_h", p.epsilon_h);
        if (!(p.epsilon_h >= 0.0)) throw ConfigError("epsilon_h must be non-negative");
        PlaneOptions o = plane_options(s);
        o.samples = static_cast<std::size_t>(s.run.number("context_samples", 2000));
        o.k_max = static_cast<int>(s.run.number("context_k_max", o.k_max));
        o.resolution = static_cast<int>(s.run.number("context_resolution", o.resolution));
        try {
            p.gfl = build_csi_context(Mode::Gfl, s.cfg, o);
            p.gfm = build_csi_context(Mode::Gfm, s.cfg, o);
        } catch (const std::exception& e) {
            throw StageError("csi-context", e.what());
        }
        (void)sc;
        return p;
    }
    throw ConfigError("unknown policy '" + name + "' (none, threshold, csi)");
}

/// Verdicts per interval between scripted events, from `from` on.
std::vector<std::pair<std::pair<double, double>, ResponseAssessment>> segment_verdicts(
    const SimulationResult& r, const Scenario& sc, double from) {
    std::vector<double> cuts{from};
    for (const auto& e : sc.events)
        if (e.time > from && e.time < sc.duration) cuts.push_back(e.time);
    cuts.push_back(sc.duration);
    std::vector<std::pair<std::pair<double, double>, ResponseAssessment>> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] < 0.2) continue;  // fewer than two windows
        if (r.diverged && r.divergence_time < cuts[i]) break;
        out.push_back({{cuts[i], cuts[i + 1]}, assess_response(r, cuts[i], cuts[i + 1])});
    }
    return out;
}

int cmd_simulate(const Session& s, std::ostream& out) {
    Scenario sc = scenario_from(s.run);
    if (!s.flags->mode.empty()) sc.initial_mode = session_mode(s);
    const SwitchPolicy policy = session_policy(s, sc);
    const bool compare = s.run.number("compare_linear", 0.0) != 0.0;

    SimulationOptions so;
    so.record_every = compare ? 1 : static_cast<int>(s.run.number("record_every", 1));
    if (so.record_every < 1) throw ConfigError("record_every must be at least 1");
    SimulationResult r;
    try {
        r = simulate(sc, policy, s.cfg, so);
    } catch (const EquilibriumError& e) {
        throw StageError("equilibrium", e.what());
    }
    {
        auto o = open_out(s, "trace.csv");
        write_trace(o, r);
    }

    out << "scenario = " << sc.name << '\n' << "policy = " << policy_name(policy) << '\n';
    for (const auto& sw : r.switches)
        out << "switch = " << sw.t << ' ' << to_string(sw.from) << "->" << to_string(sw.to) << " dp " << sw.dp
            << " de_ref " << sw.de_ref << " di_ref " << sw.di_ref << '\n';
    out << "switches = " << r.switches.size() << '\n';
    if (r.diverged) out << "divergence_time = " << r.divergence_time << '\n';

    const double from = s.run.number("assess_from", 0.0);
    Verdict worst = Verdict::Stable;
    for (const auto& [span, a] : segment_verdicts(r, sc, from)) {
        out << "segment = [" << span.first << ", " << span.second << ") " << to_string(a.verdict)
            << " growth " << a.growth_rate << '\n';
        worst = std::max(worst, a.verdict);
    }
    if (r.diverged) worst = Verdict::Divergent;
    out << "verdict = " << to_string(worst) << '\n';

    if (compare) {
        if (!std::holds_alternative<NoSwitching>(policy))
            throw ConfigError("compare_linear needs policy = none");
        Eigen::VectorXd du = Eigen::VectorXd::Zero(input_size(sc.initial_mode));
        std::optional<double> t_step;
        for (const auto& e : sc.events) {
            if (e.key.rfind("step.", 0) != 0) throw ConfigError("compare_linear only supports step.* events");
            if (t_step && *t_step != e.time) throw ConfigError("compare_linear needs a single step time");
            t_step = e.time;
            Setpoint sp = s.cfg.sp;
            const Eigen::VectorXd u0 = input_vector(sc.initial_mode, sp);
            SystemConfig stepped = s.cfg;
            set_parameter(stepped, e.key.substr(5), get_parameter(s.cfg, e.key.substr(5)) + e.value);
            du += input_vector(sc.initial_mode, stepped.sp) - u0;
        }
        if (!t_step) throw ConfigError("compare_linear needs a step event");
        const auto eq = solve_equilibrium(sc.initial_mode, s.cfg);
        const auto lm = linearize(sc.initial_mode, s.cfg, eq);
        const auto lin = linear_power(lm, linear_response(lm, du, *t_step, sc.duration, sc.dt));
        std::vector<double> p;
        for (const auto& rec : r.trace) p.push_back(rec.p);
        const std::size_t n = std::min(p.size(), lin.size());
        p.resize(n);
        out << "rmse = " << rmse(p, std::vector<double>(lin.begin(), lin.begin() + static_cast<long>(n)))
            << '\n';
    }
    return kOk;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Parameter file (key = value)");
    sub->add_option("--scenario", c.scenario, "Run file or shipped scenario name");
    sub->add_option("--set", c.sets, "Override key=value (repeatable)");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::NonNegativeNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Small-signal stability regions and mode switching for grid-connected inverters",
                 "gridswitch"};
    app.require_subcommand(1);
    Common c;

    auto* eq = app.add_subcommand("equilibrium", "Solve the steady state of one mode");
    auto* eig = app.add_subcommand("eigen", "Linearize and report eigenvalues");
    auto* sssr = app.add_subcommand("sssr", "Fit a stability region on a parameter plane");
    auto* ismd = app.add_subcommand("ismd", "Sample margins uniformly inside a fitted region");
    auto* gmm = app.add_subcommand("gmm", "Fit the margin regression and run gradient sweeps");
    auto* csi = app.add_subcommand("csi", "Map the comprehensive stability index");
    auto* sim = app.add_subcommand("simulate", "Time-domain run of a scenario");
    auto* pipe = app.add_subcommand("pipeline", "Region, samples, regression and index map in one run");

    for (auto* sub : {eq, eig, sssr, ismd, gmm, csi, sim, pipe}) add_common(sub, c);
    for (auto* sub : {eq, eig, sim, sssr, ismd, gmm, csi, pipe})
        sub->add_option("--mode", c.mode, "gfl or gfm");
    for (auto* sub : {sssr, ismd, gmm, csi, pipe}) {
        sub->add_option("--plane", c.plane, "Named parameter plane");
        sub->add_option("--axis", c.axes, "Custom axis name:lower:upper (repeatable)");
        sub->add_option("--origin", c.origin, "Comma-separated starting point");
    }
    sssr->add_option("--self-test", c.self_test, "Synthetic check: disk");
    sim->add_option("--policy", c.policy, "none, threshold or csi");

    std::vector<const char*> argv{"gridswitch"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    }

    const auto old = out.precision(17);
    int code = kOk;
    try {
        const Session s = open_session(c);
        if (eq->parsed()) code = cmd_equilibrium(s, out, err);
        else if (eig->parsed()) code = cmd_eigen(s, out);
        else if (sssr->parsed()) code = cmd_sssr(s, out);
        else if (ismd->parsed()) code = cmd_ismd(s, out);
        else if (gmm->parsed()) code = cmd_gmm(s, out);
        else if (csi->parsed()) code = cmd_csi(s, out);
        else if (sim->parsed()) code = cmd_simulate(s, out);
        else if (pipe->parsed()) code = cmd_pipeline(s, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        code = kConfig;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << '\n';
        code = kConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kNumerical;
    }
    out.precision(old);
    return code;
}

}  // namespace gridswitch::cli
