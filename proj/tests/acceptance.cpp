// One line per acceptance criterion: "criterion N: PASS|FAIL  <detail>".
// Exit status is the number of failed criteria (capped at 9).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "cli_app.hpp"
#include "gridswitch/config.hpp"
#include "gridswitch/equilibrium.hpp"
#include "gridswitch/linearization.hpp"
#include "gridswitch/pipeline.hpp"

using namespace gridswitch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string scenario_path(const std::string& name) {
    return std::string(GRIDSWITCH_SCENARIO_DIR) + "/" + name + ".run";
}

// Runs the CLI and collects "key = value" lines (repeated keys keep every value).
struct CliRun {
    int code = 0;
    std::multimap<std::string, std::string> values;
    std::string err;

    std::string first(const std::string& key) const {
        const auto it = values.find(key);
        return it == values.end() ? "" : it->second;
    }
    std::vector<std::string> all(const std::string& key) const {
        std::vector<std::string> out;
        for (auto [a, b] = values.equal_range(key); a != b; ++a) out.push_back(a->second);
        return out;
    }
};

CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = cli::run(args, out, err);
    r.err = err.str();
    std::istringstream lines(out.str());
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) r.values.emplace(line.substr(0, eq), line.substr(eq + 3));
    }
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gridswitch_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

PlaneOptions options_from(const RunFile& run) {
    PlaneOptions o;
    o.samples = static_cast<std::size_t>(run.number("samples", static_cast<double>(o.samples)));
    o.holdout = static_cast<std::size_t>(run.number("holdout", static_cast<double>(o.holdout)));
    o.k_max = static_cast<int>(run.number("k_max", o.k_max));
    o.restarts = static_cast<int>(run.number("restarts", o.restarts));
    o.resolution = static_cast<int>(run.number("resolution", o.resolution));
    if (run.has("weights")) {
        const auto w = run.numbers("weights");
        o.weights = {w.at(0), w.at(1), w.at(2)};
    }
    return o;
}

// ---------------------------------------------------------------------------

Outcome model_fidelity() {
    double worst = 0.0;
    for (Mode m : {Mode::Gfl, Mode::Gfm})
        for (double dp : {0.005, 0.010, 0.015}) {
            const SystemConfig cfg;
            Scenario sc;
            sc.duration = 0.5;
            sc.initial_mode = m;
            sc.events = {{0.01, "step.p_ref", dp}};
            const auto res = simulate(sc, NoSwitching{}, cfg);
            const auto lm = linearize(m, cfg, solve_equilibrium(m, cfg));
            Eigen::VectorXd du = Eigen::VectorXd::Zero(input_size(m));
            du[0] = dp;
            const auto lin = linear_power(lm, linear_response(lm, du, 0.01, sc.duration, sc.dt));
            std::vector<double> p;
            for (const auto& r : res.trace) p.push_back(r.p);
            const std::size_t n = std::min(p.size(), lin.size());
            p.resize(n);
            worst = std::max(worst, rmse(p, std::vector<double>(lin.begin(), lin.begin() + static_cast<long>(n))));
        }
    return {worst < 2e-4, fmt::format("worst RMSE over GFL/GFM x 3 steps = {:.3e} (limit 2e-4)", worst)};
}

std::string verdict_of(const std::string& scenario, const std::string& key, double value) {
    const auto r = cli({"simulate", "--scenario", scenario, "--set", fmt::format("{}={}", key, value), "--out",
                        scratch("verdict").string()});
    return r.code == 0 ? r.first("verdict") : fmt::format("exit {}", r.code);
}

Outcome boundary_anchors() {
    std::vector<std::string> notes;
    bool ok = true;

    // Grid-following inner current loop, SCR 2, ki_i1 = 2500.
    {
        const auto run = read_run_file(scenario_path("fig8-gfl"));
        const SystemConfig cfg = apply_run_overrides(SystemConfig{}, run);
        const auto space = make_space(plane_preset("gfl-icl"), cfg);
        std::optional<double> start;
        for (int k = 1; k <= 200 && !start; ++k) {
            const double kp = 0.05 * k;
            const auto m = space.margin_fn()(Eigen::Vector2d(kp, 2500.0));
            if (m && *m > 0.01) start = kp;
        }
        if (!start) {
            ok = false;
            notes.push_back("GFL: no stable kp_i1 on the ki_i1 = 2500 line, ray search impossible");
        } else {
            const auto ray = ray_boundary_search(space, space.to_unit(Eigen::Vector2d(*start, 2500.0)),
                                                 Eigen::Vector2d(1, 0));
            const double kp = ray.point.coords[0];
            const bool hit = ray.found && std::abs(kp / 3.17 - 1.0) <= 0.10;
            ok = ok && hit;
            notes.push_back(fmt::format("GFL boundary kp_i1 = {:.3f} (target 3.17 +-10%)", kp));
        }
        const std::vector<std::pair<double, std::string>> want = {
            {1.0, "stable"}, {2.5, "stable"}, {3.17, "sustained-oscillation"}, {4.0, "unstable"}};
        std::string got;
        for (const auto& [kp, v] : want) {
            const auto verdict = verdict_of("fig8-gfl", "kp_i1", kp);
            ok = ok && verdict == v;
            got += fmt::format(" {}:{}", kp, verdict);
        }
        notes.push_back("GFL verdicts" + got);
    }

    // Grid-forming inner current loop, SCR 4, ki_i2 = 500.
    {
        const auto run = read_run_file(scenario_path("fig8-gfm"));
        const SystemConfig cfg = apply_run_overrides(SystemConfig{}, run);
        const auto space = make_space(plane_preset("gfm-icl"), cfg);
        const auto ray = ray_boundary_search(space, space.to_unit(Eigen::Vector2d(10.0, 500.0)),
                                             Eigen::Vector2d(-1, 0));
        const double kp = ray.point.coords[0];
        ok = ok && ray.found && std::abs(kp / 6.73 - 1.0) <= 0.10;
        notes.push_back(fmt::format("GFM boundary kp_i2 = {:.3f} (target 6.73 +-10%)", kp));
        const std::vector<std::pair<double, std::string>> want = {
            {10.0, "stable"}, {7.0, "stable"}, {6.73, "sustained-oscillation"}, {6.0, "unstable"}};
        std::string got;
        for (const auto& [k, v] : want) {
            const auto verdict = verdict_of("fig8-gfm", "kp_i2", k);
            ok = ok && verdict == v;
            got += fmt::format(" {}:{}", k, verdict);
        }
        notes.push_back("GFM verdicts" + got);
    }

    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    return {ok, detail};
}

struct FittedPlane {
    std::string plane;
    double scr;
    ParamSpace space;
    Region region;
};

std::vector<FittedPlane> fitted_planes;

Outcome region_ordering() {
    for (const char* name : {"gfl-opl", "gfl-icl", "gfm-ovl", "gfm-icl"})
        for (double scr : {2.0, 4.0}) {
            SystemConfig cfg;
            cfg.params.scr = scr;
            auto space = make_space(plane_preset(name), cfg);
            const auto origin = find_origin(space, 12);
            if (!origin) return {false, fmt::format("no stable point on {} at SCR {}", name, scr)};
            auto region = fit_sssr(space, *origin);
            fitted_planes.push_back({name, scr, std::move(space), std::move(region)});
        }
    auto vol = [](const std::string& plane, double scr) {
        for (const auto& f : fitted_planes)
            if (f.plane == plane && f.scr == scr) return f.region.volume_unit;
        return 0.0;
    };
    const bool opl = vol("gfl-opl", 4) > vol("gfl-opl", 2);
    const bool icl = vol("gfl-icl", 4) > vol("gfl-icl", 2);
    const bool ovl = vol("gfm-ovl", 2) > vol("gfm-ovl", 4);
    const bool gicl = vol("gfm-icl", 2) > vol("gfm-icl", 4);
    const bool cross = vol("gfm-ovl", 2) > vol("gfm-icl", 2) && vol("gfm-ovl", 4) > vol("gfm-icl", 4);
    return {opl && icl && ovl && gicl && cross,
            fmt::format("unit-box volumes: GFL OPL {:.4f}@4 vs {:.4f}@2, GFL ICL {:.4f}@4 vs {:.4f}@2, "
                        "GFM OVL {:.4f}@2 vs {:.4f}@4, GFM ICL {:.4f}@2 vs {:.4f}@4, OVL>ICL {}",
                        vol("gfl-opl", 4), vol("gfl-opl", 2), vol("gfl-icl", 4), vol("gfl-icl", 2),
                        vol("gfm-ovl", 2), vol("gfm-ovl", 4), vol("gfm-icl", 2), vol("gfm-icl", 4),
                        cross ? "yes" : "no")};
}

Outcome region_fitting() {
    bool ok = true;
    std::string detail;
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{1.2, 0.6}}) {
        ParamSpace sp({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}}, [a, b](const Eigen::VectorXd& p) -> std::optional<double> {
            return 1.0 - std::hypot(p[0] / a, p[1] / b);
        });
        FitOptions fo;
        fo.epsilon_r = 0.001;
        const auto r = fit_sssr(sp, Eigen::Vector2d::Zero(), fo);
        const double err = r.volume / (std::numbers::pi * a * b) - 1.0;
        ok = ok && std::abs(err) <= 0.02;
        detail += fmt::format("area error ({}, {}) = {:+.3f}%; ", a, b, 100.0 * err);
    }
    // Every stored point of the fitted model planes re-evaluates inside the band.
    std::size_t checked = 0, bad = 0;
    for (const auto& f : fitted_planes)
        for (const auto& p : f.region.points) {
            if (p.clipped) continue;
            ++checked;
            const auto m = f.space.margin_at_unit(p.unit);
            bad += !(m && *m >= 0.0 && *m <= 0.01 + 1e-12);
        }
    ok = ok && bad == 0 && checked > 0;
    detail += fmt::format("{} of {} boundary points outside [-eps, 0]", bad, checked);
    return {ok, detail};
}

struct ScrXrFit {
    Mode mode;
    PlaneAnalysis analysis;
};
std::vector<ScrXrFit> scr_xr_fits;

Outcome gmm_regression() {
    const auto run = read_run_file(scenario_path("fig9"));
    const PlaneOptions opts = options_from(run);
    bool ok = true;
    std::string detail;
    for (Mode m : {Mode::Gfl, Mode::Gfm}) {
        const SystemConfig cfg = apply_run_overrides(SystemConfig{}, run);
        auto a = analyze_plane(plane_preset(m == Mode::Gfl ? "gfl-scr-xr" : "gfm-scr-xr"), cfg, opts);
        ok = ok && a.r2 >= 0.88;
        detail += fmt::format("{} R2 = {:.3f} (holdout {:.3f}, K = {}); ", to_string(m), a.r2, a.r2_holdout,
                              a.gmm.k);

        // Analytic gradient against central differences at 100 ISMD points.
        // Tolerance: 1e-5 relative plus the roundoff floor of the difference
        // quotient, eps * |m| / h, which dominates on a flat margin field.
        const auto& g = a.gmm.model;
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<std::size_t> pick(0, a.ismd.samples.size() - 1);
        double worst = 0.0, worst_rel = 0.0;
        for (int k = 0; k < 100; ++k) {
            const Eigen::VectorXd x = a.ismd.samples[pick(rng)].coords;
            const Eigen::VectorXd grad = margin_gradient(g, x);
            const double m = std::abs(predict_margin(g, x));
            Eigen::VectorXd fd(x.size());
            double floor2 = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const auto& ax = a.space.axes()[static_cast<std::size_t>(i)];
                const double h = 1e-5 * (ax.upper - ax.lower);
                Eigen::VectorXd p = x, q = x;
                p[i] += h;
                q[i] -= h;
                fd[i] = (predict_margin(g, p) - predict_margin(g, q)) / (2 * h);
                const double r = 4.0 * std::numeric_limits<double>::epsilon() * m / h;
                floor2 += r * r;
            }
            const double err = (grad - fd).norm();
            worst = std::max(worst, err / (1e-5 * fd.norm() + std::sqrt(floor2)));
            worst_rel = std::max(worst_rel, err / std::max(fd.norm(), 1e-300));
        }
        ok = ok && worst <= 1.0;
        const auto& h = g.log_likelihood_history;
        bool monotone = true;
        for (std::size_t i = 1; i < h.size(); ++i) monotone = monotone && h[i] >= h[i - 1] - 1e-10;
        ok = ok && monotone;
        detail += fmt::format("gradient err/tol {:.2f} (max rel {:.1e}), EM monotone {}; ", worst, worst_rel,
                              monotone ? "yes" : "no");
        scr_xr_fits.push_back({m, std::move(a)});
    }
    return {ok, detail};
}

Outcome sensitivity_signs() {
    const auto run = read_run_file(scenario_path("fig9"));
    const int n = static_cast<int>(run.number("sweep_points", 41));
    int inside = 0, agree = 0;
    double gfl_scr = 0.0, gfl_xr = 0.0;
    std::string detail;
    for (const auto& text : run.sweeps) {
        const SweepSpec spec = parse_sweep(text);
        const ScrXrFit* fit = nullptr;
        for (const auto& f : scr_xr_fits)
            if (f.mode == spec.mode) fit = &f;
        if (!fit) return {false, "regression fits unavailable"};
        const auto s = run_sweep(spec, fit->analysis.space, fit->analysis.region, fit->analysis.gmm.model, n);
        inside += s.inside;
        agree += s.agree;
        detail += fmt::format("{} {}: {}/{}; ", to_string(spec.mode), spec.axis, s.agree, s.inside);
        if (spec.mode == Mode::Gfl) (spec.axis == "scr" ? gfl_scr : gfl_xr) = s.mean_abs_model_slope;
    }
    const double frac = inside ? static_cast<double>(agree) / inside : 0.0;
    detail += fmt::format("pooled {:.3f}; GFL mean |dm/dX/R| {:.2e} vs |dm/dSCR| {:.2e}", frac, gfl_xr, gfl_scr);
    return {frac >= 0.9 && gfl_xr > gfl_scr, detail};
}

Outcome csi_structure() {
    const auto run = read_run_file(scenario_path("fig10"));
    const SystemConfig cfg = apply_run_overrides(SystemConfig{}, run);
    const PlaneOptions opts = options_from(run);
    const auto o = run.numbers("origin");
    const auto a = analyze_plane(plane_preset(run.get("plane", "")), cfg, opts, Eigen::Vector2d(o.at(0), o.at(1)));
    const CsiMap& map = *a.map;
    const auto& w = opts.weights;
    bool bounded = true;
    for (const auto& p : map.points) bounded = bounded && p.j >= -w.w_s - 1e-12 && p.j <= w.w_m + w.w_d + 1e-12;
    const bool distinct = map.argmax_j != map.argmax_margin;

    // Rescaling the margin field rescales its gradient too; the index ranking must not move.
    std::vector<CsiPoint> scaled = map.points;
    for (auto& p : scaled) {
        p.margin *= 3.7;
        p.sensitivity *= 3.7;
    }
    const bool invariant = assemble_csi(scaled, w).argmax_j == map.argmax_j;
    const auto& bj = map.points[map.argmax_j];
    const auto& bm = map.points[map.argmax_margin];
    return {distinct && bounded && invariant,
            fmt::format("argmax_J ({:.3f}, {:.1f}) vs argmax_margin ({:.3f}, {:.1f}); bounded {}; rescale-invariant {}",
                        bj.coords[0], bj.coords[1], bm.coords[0], bm.coords[1], bounded ? "yes" : "no",
                        invariant ? "yes" : "no")};
}

struct SwitchLine {
    double t;
    std::string dir;
    double dp, de, di;
};

std::vector<SwitchLine> parse_switches(const CliRun& r) {
    std::vector<SwitchLine> out;
    for (const auto& s : r.all("switch")) {
        std::istringstream in(s);
        SwitchLine l;
        std::string tag;
        in >> l.t >> l.dir >> tag >> l.dp >> tag >> l.de >> tag >> l.di;
        out.push_back(l);
    }
    return out;
}

CliRun fig11_csi, fig11_threshold;

Outcome switching_scenario() {
    fig11_csi = cli({"simulate", "--scenario", "fig11", "--out", scratch("fig11_csi").string()});
    fig11_threshold =
        cli({"simulate", "--scenario", "fig11", "--policy", "threshold", "--out", scratch("fig11_thr").string()});
    if (fig11_csi.code != 0 || fig11_threshold.code != 0)
        return {false, fmt::format("CLI exit codes {} / {}: {}{}", fig11_csi.code, fig11_threshold.code,
                                   fig11_csi.err, fig11_threshold.err)};
    const auto sw = parse_switches(fig11_csi);
    const bool two = sw.size() == 2;
    const bool down = !sw.empty() && sw[0].dir == "gfl->gfm" && sw[0].t >= 1.0 && sw[0].t <= 1.05;
    const bool back = sw.size() >= 2 && sw[1].dir == "gfm->gfl" && sw[1].t >= 2.5;
    const bool bounded = fig11_csi.first("verdict") == "stable" && fig11_csi.first("divergence_time").empty();

    const auto tsw = parse_switches(fig11_threshold);
    bool none_at_1 = true;
    for (const auto& s : tsw) none_at_1 = none_at_1 && !(s.t >= 1.0 && s.t <= 1.05);
    bool diverges_after = false;
    for (const auto& seg : fig11_threshold.all("segment")) {
        double a = 0.0;
        std::sscanf(seg.c_str(), "[%lf", &a);
        if (a >= 1.5 && seg.find("unstable") != std::string::npos) diverges_after = true;
    }
    std::string times;
    for (const auto& s : sw) times += fmt::format(" {}@{:.3f}", s.dir, s.t);
    return {two && down && back && bounded && none_at_1 && diverges_after,
            fmt::format("CSI switches:{} ({}); threshold switches {}, divergence after 1.5 s {}",
                        times.empty() ? " none" : times, bounded ? "bounded" : "unbounded",
                        fig11_threshold.first("switches"), diverges_after ? "yes" : "no")};
}

Outcome bumpless_transfer_check() {
    const auto sw = parse_switches(fig11_csi);
    double dp = 0.0, dref = 0.0;
    for (const auto& s : sw) {
        dp = std::max(dp, s.dp);
        dref = std::max({dref, s.de, s.di});
    }
    // Round trip at one instant, mid-transient after the fig11 SCR drop.
    const auto run = read_run_file(scenario_path("fig11"));
    SystemConfig cfg = apply_run_overrides(SystemConfig{}, run);
    Scenario sc;
    sc.duration = 0.05;
    sc.events = {{0.01, "scr", 3.1}};
    const auto res = simulate(sc, NoSwitching{}, cfg);
    cfg.params.scr = 3.1;
    const Eigen::VectorXd x = res.trace.back().state;
    const Eigen::VectorXd z = bumpless_transfer(Mode::Gfm, bumpless_transfer(Mode::Gfl, x, Mode::Gfm, cfg), Mode::Gfl, cfg);
    const double trip = (x - z).cwiseAbs().maxCoeff();
    return {!sw.empty() && dp < 1e-6 && dref < 1e-9 && trip < 1e-10,
            fmt::format("{} switches: max |dP| {:.1e}, max reference jump {:.1e}; round trip {:.1e}", sw.size(), dp,
                        dref, trip)};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, model_fidelity},    {2, boundary_anchors},   {3, region_ordering},
        {4, region_fitting},    {5, gmm_regression},     {6, sensitivity_signs},
        {7, csi_structure},     {8, switching_scenario}, {9, bumpless_transfer_check},
    };
    int failed = 0;
    for (const auto& [id, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << fmt::format("criterion {}: {}  [{:.1f} s] {}", id, o.pass ? "PASS" : "FAIL", secs, o.detail)
                  << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failed, criteria.size()) << std::endl;
    return std::min(failed, 9);
}
