#include <doctest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "gridswitch/presets.hpp"
#include "gridswitch/sssr.hpp"

using namespace gridswitch;

namespace {

ParamSpace disk_space(double a = 1.0, double b = 1.0) {
    return ParamSpace({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}}, [a, b](const Eigen::VectorXd& p) -> std::optional<double> {
        return 1.0 - std::hypot(p[0] / a, p[1] / b);
    });
}

FitOptions serial_fit() {
    FitOptions o;
    o.exec = Exec::Serial;
    return o;
}

}  // namespace

TEST_SUITE("sssr") {
    TEST_CASE("polytope volume of simple shapes") {
        const Eigen::VectorXd o = Eigen::Vector2d(0.5, 0.5);
        std::vector<Eigen::VectorXd> sq = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1),
                                           Eigen::Vector2d(0, 1)};
        CHECK(polytope_volume(o, sq, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}) == doctest::Approx(1.0));
        // Corners of a square of side sqrt(2) about its center.
        std::vector<Eigen::VectorXd> sq2 = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(-1, 0),
                                            Eigen::Vector2d(0, -1)};
        CHECK(polytope_volume(Eigen::Vector2d::Zero(), sq2, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}) == doctest::Approx(2.0));

        std::vector<Eigen::VectorXd> hex;
        std::vector<std::vector<int>> f;
        for (int k = 0; k < 6; ++k) {
            const double t = k * std::numbers::pi / 3.0;
            hex.push_back(Eigen::Vector2d(std::cos(t), std::sin(t)));
            f.push_back({k, (k + 1) % 6});
        }
        CHECK(polytope_volume(Eigen::Vector2d::Zero(), hex, f) == doctest::Approx(3.0 * std::sqrt(3.0) / 2.0));
        // A degenerate facet contributes nothing.
        hex.push_back(Eigen::Vector2d(2, 0));
        f.push_back({0, 6});
        CHECK(polytope_volume(Eigen::Vector2d::Zero(), hex, f) == doctest::Approx(3.0 * std::sqrt(3.0) / 2.0));
    }

    TEST_CASE("ray search on the synthetic disk") {
        const auto sp = disk_space();
        const Eigen::VectorXd o = sp.to_unit(Eigen::Vector2d::Zero());
        for (double t : {0.0, 0.7, 2.0, 3.9, 5.1}) {
            const Eigen::VectorXd dir = Eigen::Vector2d(std::cos(t), std::sin(t));
            const auto r = ray_boundary_search(sp, o, dir);
            REQUIRE(r.found);
            const double radius = r.point.coords.norm();
            CHECK(radius <= 1.0);
            CHECK(radius >= 1.0 - 0.01 - 1e-9);
            // The opposite direction finds the same radius.
            const auto back = ray_boundary_search(sp, o, -dir);
            CHECK(back.point.coords.norm() == doctest::Approx(radius).epsilon(0.011));
        }
    }

    TEST_CASE("ray search from an unstable origin is rejected") {
        const auto sp = disk_space();
        CHECK_THROWS_AS(ray_boundary_search(sp, sp.to_unit(Eigen::Vector2d(1.2, 0.0)), Eigen::Vector2d(1, 0)),
                        RegionError);
    }

    TEST_CASE("ray leaving the box is flagged") {
        ParamSpace sp({{"x", 0, 1}, {"y", 0, 1}}, [](const Eigen::VectorXd&) -> std::optional<double> { return 1.0; });
        const auto r = ray_boundary_search(sp, Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1, 0));
        CHECK_FALSE(r.found);
        CHECK(r.point.clipped);
        CHECK(r.point.unit[0] == doctest::Approx(1.0));
    }

    TEST_CASE("disk and ellipse areas") {
        auto r = fit_sssr(disk_space(), Eigen::Vector2d::Zero(), serial_fit());
        CHECK(r.volume == doctest::Approx(std::numbers::pi).epsilon(0.02));
        r = fit_sssr(disk_space(1.2, 0.6), Eigen::Vector2d(0.1, -0.1), serial_fit());
        CHECK(r.volume == doctest::Approx(std::numbers::pi * 1.2 * 0.6).epsilon(0.02));
    }

    TEST_CASE("fit invariants") {
        const auto sp = disk_space(1.2, 0.6);
        const auto r = fit_sssr(sp, Eigen::Vector2d::Zero(), serial_fit());
        // Boundary points re-verify inside the band.
        for (const auto& p : r.points) {
            const double m = *sp.margin_at_unit(p.unit);
            CHECK(m >= 0.0);
            CHECK(m <= 0.01 + 1e-12);
        }
        // Quiescence: the last refinement changed the volume by at most eps_r V.
        REQUIRE(r.volume_history.size() >= 2);
        const double last = r.volume_history.back();
        const double prev = r.volume_history[r.volume_history.size() - 2];
        CHECK(std::abs(last - prev) <= 0.001 * last + 1e-15);
        // Each facet is an (l-1)-simplex with an outward unit normal.
        for (const auto& f : r.facets) {
            CHECK(f.vertices.size() == 2);
            CHECK(f.normal.norm() == doctest::Approx(1.0));
            const Eigen::VectorXd mid = 0.5 * (r.points[f.vertices[0]].unit + r.points[f.vertices[1]].unit);
            CHECK(f.normal.dot(mid - r.origin) > 0.0);
        }
    }

    TEST_CASE("containment agrees with the margin sign") {
        const auto sp = disk_space(1.2, 0.6);
        const auto r = fit_sssr(sp, Eigen::Vector2d::Zero(), serial_fit());
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int disagree = 0;
        for (int k = 0; k < 500; ++k) {
            const Eigen::VectorXd p = Eigen::Vector2d(u(rng), u(rng));
            const bool stable = *sp.margin_at_unit(p) > 0.0;
            disagree += contains_unit(r, p) != stable;
        }
        // Only the thin sliver between chords and arc may disagree.
        CHECK(disagree <= 10);
    }

    TEST_CASE("dimension guard and unstable origin") {
        std::vector<Axis> axes;
        for (int i = 0; i < 7; ++i) axes.push_back({"a" + std::to_string(i), -1, 1});
        ParamSpace big(axes, [](const Eigen::VectorXd& p) -> std::optional<double> { return 1.0 - p.norm(); });
        CHECK_THROWS_AS(fit_sssr(big, Eigen::VectorXd::Zero(7)), RegionError);
        CHECK_THROWS_AS(fit_sssr(disk_space(), Eigen::Vector2d(1.3, 0.0)), RegionError);
    }

    TEST_CASE("three-dimensional ball is star shaped and bounded") {
        ParamSpace ball({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}, {"z", -1.5, 1.5}},
                        [](const Eigen::VectorXd& p) -> std::optional<double> { return 1.0 - p.norm(); });
        FitOptions o = serial_fit();
        o.epsilon_r = 0.01;
        const auto r = fit_sssr(ball, Eigen::Vector3d::Zero(), o);
        CHECK(r.facets.size() >= 8);
        CHECK(r.volume > 0.5 * 4.0 / 3.0 * std::numbers::pi);
        CHECK(r.volume < 4.0 / 3.0 * std::numbers::pi);
    }

    TEST_CASE("ISMD sampling statistics and determinism") {
        ParamSpace sq({{"x", -1, 1}, {"y", -1, 1}}, [](const Eigen::VectorXd& p) -> std::optional<double> {
            return 1.0 - p.norm();
        });
        const auto r = fit_sssr(sq, Eigen::Vector2d::Zero(), serial_fit());
        const auto a = sample_ismd(r, sq, 10000, 42, Exec::Serial);
        REQUIRE(a.samples.size() == 10000);
        CHECK(static_cast<double>(a.inside) / a.drawn == doctest::Approx(std::numbers::pi / 4).epsilon(0.03));
        for (const auto& s : a.samples) CHECK(s.margin > 0.0);
        const auto b = sample_ismd(r, sq, 10000, 42, Exec::Parallel);
        REQUIRE(b.samples.size() == a.samples.size());
        bool same = true;
        for (std::size_t i = 0; i < a.samples.size(); ++i)
            same = same && (a.samples[i].coords.array() == b.samples[i].coords.array()).all() &&
                   a.samples[i].margin == b.samples[i].margin;
        CHECK(same);
    }

    TEST_CASE("ISMD rejects a mismatched box") {
        // The region comes from one margin field, sampling evaluates another
        // that is unstable almost everywhere, so acceptance collapses.
        const auto sp = disk_space();
        const auto r = fit_sssr(sp, Eigen::Vector2d::Zero(), serial_fit());
        ParamSpace wrong({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}},
                         [](const Eigen::VectorXd&) -> std::optional<double> { return -1.0; });
        CHECK_THROWS_AS(sample_ismd(r, wrong, 100, 1, Exec::Serial), RegionError);
        CHECK_THROWS_AS(sample_ismd(r, sp, 0, 1, Exec::Serial), RegionError);
    }

    TEST_CASE("union probe") {
        const auto sp = disk_space();
        const auto left = fit_sssr(sp, Eigen::Vector2d::Zero(), serial_fit());
        ParamSpace shifted({{"x", -1.5, 1.5}, {"y", -1.5, 1.5}}, [](const Eigen::VectorXd& p) -> std::optional<double> {
            return 0.5 - std::hypot(p[0] - 0.9, p[1]);
        });
        const auto right = fit_sssr(shifted, Eigen::Vector2d(0.9, 0.0), serial_fit());
        const std::vector<const Region*> both = {&left, &right};
        CHECK(region_union_probe(both, sp, Eigen::Vector2d(1.3, 0.0)) == UnionMembership::InsideSome);
        CHECK(region_union_probe(both, sp, Eigen::Vector2d(-0.5, 0.0)) == UnionMembership::InsideSome);
        CHECK(region_union_probe(both, sp, Eigen::Vector2d(1.4, 1.4)) == UnionMembership::InsideNone);
        ParamSpace other({{"p", 0, 1}, {"q", 0, 1}}, sp.margin_fn());
        CHECK_THROWS_AS(region_union_probe(both, other, Eigen::Vector2d(0.5, 0.5)), RegionError);
    }

    TEST_CASE("origin search prefers deep interior") {
        const auto o = find_origin(disk_space(), 12, 0.01, Exec::Serial);
        REQUIRE(o.has_value());
        CHECK(o->norm() < 0.2);
    }

    TEST_CASE("exports") {
        const auto sp = disk_space();
        const auto r = fit_sssr(sp, Eigen::Vector2d::Zero(), serial_fit());
        std::ostringstream pts, fct;
        write_region_points(pts, r, sp);
        write_region_facets(fct, r);
        const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
        CHECK(lines(pts.str()) == static_cast<long>(r.points.size()) + 1);
        CHECK(lines(fct.str()) == static_cast<long>(r.facets.size()));
    }

    TEST_CASE("grid-forming ICL anchor") {
        // The calibrated boundary crosses the ki_i2 = 500 slice at kp_i2 = 6.73.
        SystemConfig cfg;
        cfg.params.scr = 4.0;
        const auto sp = make_space(plane_preset("gfm-icl"), cfg);
        const auto r = ray_boundary_search(sp, sp.to_unit(Eigen::Vector2d(10.0, 500.0)), Eigen::Vector2d(-1, 0));
        REQUIRE(r.found);
        CHECK(r.point.coords[0] == doctest::Approx(6.73).epsilon(0.02));
    }
}
