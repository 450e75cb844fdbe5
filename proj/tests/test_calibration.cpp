#include <doctest.h>

#include "gridswitch/linearization.hpp"

using namespace gridswitch;

namespace {

double gfm_icl_margin(double k_u, double kp_i2) {
    SystemConfig cfg;
    cfg.params.scr = 4.0;
    cfg.gfm.k_u = k_u;
    cfg.gfm.ki_i2 = 500.0;
    cfg.gfm.kp_i2 = kp_i2;
    return margin(Mode::Gfm, cfg);
}

/// Brute-force crossing of the margin band along kp_i2 at fixed k_u.
double boundary_kp(double k_u) {
    double lo = 5.0, hi = 9.0;  // unstable, stable
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gfm_icl_margin(k_u, mid) > 0.0 ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

TEST_SUITE("calibration") {
    TEST_CASE("default k_u places the grid-forming ICL boundary at kp_i2 = 6.73") {
        const double k_u = GfmGains{}.k_u;
        CHECK(boundary_kp(k_u) == doctest::Approx(6.73).epsilon(0.01));
        const double m = gfm_icl_margin(k_u, 6.73);
        CHECK(m >= -kMarginEpsilon);
        CHECK(m <= kMarginEpsilon);
    }

    TEST_CASE("the uncalibrated default misses the anchor") {
        CHECK(boundary_kp(1.0) > 6.73 * 1.03);
    }
}
