#include <doctest.h>

#include <sstream>

#include "gridswitch/scenario_io.hpp"

using namespace gridswitch;

TEST_SUITE("scenario_io") {
    TEST_CASE("options, overrides, events and sweeps are separated") {
        std::istringstream in(
            "# comment\n"
            "plane = gfm-icl\n"
            "scr = 2   # override\n"
            "origin = 10, 500\n"
            "event = 1.0, scr, 3.1\n"
            "event = 1.5, step.p_ref, 0.01\n"
            "sweep = gfl, scr, 2, 18, x_over_r, 10\n"
            "duration = 2\n");
        const auto run = read_run_file(in, "demo");
        CHECK(run.name == "demo");
        CHECK(run.get("plane", "") == "gfm-icl");
        CHECK(run.get("missing", "fallback") == "fallback");
        CHECK(run.numbers("origin") == std::vector<double>{10.0, 500.0});
        CHECK(run.number("duration", 0.0) == 2.0);
        REQUIRE(run.overrides.size() == 1);
        CHECK(run.overrides[0].key == "scr");
        REQUIRE(run.events.size() == 2);
        CHECK(run.events[1].key == "step.p_ref");
        CHECK(run.events[1].value == doctest::Approx(0.01));
        REQUIRE(run.sweeps.size() == 1);

        const auto cfg = apply_run_overrides(SystemConfig{}, run);
        CHECK(cfg.params.scr == 2.0);
        const auto sc = scenario_from(run);
        CHECK(sc.duration == 2.0);
        CHECK(sc.events.size() == 2);
    }

    TEST_CASE("unknown keys are named with their line") {
        std::istringstream in("duration = 1\nbogus = 3\n");
        try {
            read_run_file(in);
            FAIL("expected an error");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("bogus") != std::string::npos);
            CHECK(msg.find("line 2") != std::string::npos);
        }
    }

    TEST_CASE("malformed events and sweeps") {
        std::istringstream ev("event = 1.0, scr\n");
        CHECK_THROWS_AS(read_run_file(ev), ConfigError);
        std::istringstream sw("sweep = gfl, scr, 2\n");
        CHECK_THROWS_AS(read_run_file(sw), ConfigError);
        std::istringstream order("event = 1.0, scr, 3\nevent = 0.5, scr, 4\n");
        const auto run = read_run_file(order);
        CHECK_THROWS_AS(scenario_from(run), ConfigError);
    }

    TEST_CASE("sweep parsing") {
        const auto s = parse_sweep("gfm, x_over_r, 0, 20, scr, 2");
        CHECK(s.mode == Mode::Gfm);
        CHECK(s.axis == "x_over_r");
        CHECK(s.to == 20.0);
        CHECK(s.fixed_axis == "scr");
        CHECK(s.fixed_value == 2.0);
        CHECK_THROWS_AS(parse_sweep("gfx, scr, 0, 1, x_over_r, 2"), ConfigError);
        CHECK(split_list(" a , b,c ") == std::vector<std::string>{"a", "b", "c"});
    }

    TEST_CASE("shipped scenarios parse") {
        for (const char* name : {"fig7", "fig8-gfl", "fig8-gfm", "fig9", "fig10", "fig11"}) {
            CAPTURE(name);
            const auto run = read_run_file(std::string(GRIDSWITCH_SCENARIO_DIR) + "/" + name + ".run");
            CHECK_NOTHROW(apply_run_overrides(SystemConfig{}, run));
            CHECK_NOTHROW(scenario_from(run));
        }
    }
}
