#include "wakelab/farm_core.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace wakelab;
using Catch::Approx;

namespace {

// Kinetic power through the disc, written out independently of the library.
double kinetic_power(double d, double cp, double u) {
    const double area = std::numbers::pi * d * d / 4.0;
    return 0.5 * 1.225 * area * cp * u * u * u;
}

} // namespace

TEST_CASE("unwaked power at 10 m/s matches hand arithmetic") {
    const TurbineSpec spec;
    const double p = turbine_power(spec, 10.0, 0.0);
    CHECK(p == Approx(7.19e6).epsilon(0.005));
    CHECK(p == Approx(kinetic_power(178.3, 0.47, 10.0)).epsilon(1e-12));
}

TEST_CASE("zero wind gives zero power") {
    CHECK(turbine_power(TurbineSpec{}, 0.0, 0.0) == 0.0);
    CHECK(turbine_power(TurbineSpec{}, 0.0, 25.0) == 0.0);
}

TEST_CASE("yaw loss follows the cosine exponent") {
    const TurbineSpec spec;
    const double expected = kinetic_power(178.3, 0.47, 10.0) * std::pow(std::cos(20.0 * std::numbers::pi / 180.0), 1.88);
    CHECK(turbine_power(spec, 10.0, 20.0) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("power is even in yaw and increasing in speed below rated") {
    const TurbineSpec spec;
    for (double g = 0.0; g <= 45.0; g += 2.5) CHECK(turbine_power(spec, 9.0, g) == turbine_power(spec, 9.0, -g));
    double last = -1.0;
    for (double u = 0.25; u < spec.rated_wind_speed; u += 0.25) {
        const double p = turbine_power(spec, u, 10.0);
        CHECK(p > last);
        last = p;
    }
}

TEST_CASE("power saturates at rated above rated speed") {
    const TurbineSpec spec;
    CHECK(turbine_power(spec, spec.rated_wind_speed, 0.0) == spec.rated_power);
    CHECK(turbine_power(spec, 20.0, 0.0) == spec.rated_power);
    CHECK(turbine_power(spec, 11.0, 0.0) < spec.rated_power);
}

TEST_CASE("flow angle convention") {
    CHECK(flow_angle(270.0) == 0.0);
    CHECK(flow_angle(180.0) == Approx(std::numbers::pi / 2.0).epsilon(1e-15));
    CHECK(flow_angle(90.0) == Approx(std::numbers::pi).epsilon(1e-15));
    const FlowFrame west(270.0);
    CHECK(west.downstream({100.0, 0.0}) == Approx(100.0));
    CHECK(west.lateral({0.0, 50.0}) == Approx(50.0));
    const FlowFrame south(180.0);
    CHECK(south.downstream({0.0, 100.0}) == Approx(100.0));
}

TEST_CASE("flow angle stays within one turn of the origin") {
    for (double wd = 0.0; wd < 360.0; wd += 7.5) {
        const double th = flow_angle(wd);
        CHECK(th > -std::numbers::pi / 2.0 - 1e-12);
        CHECK(th <= 3.0 * std::numbers::pi / 2.0 + 1e-12);
    }
}

TEST_CASE("spec and layout validation") {
    TurbineSpec bad;
    bad.cp = 0.7;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.ct = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.rotor_diameter = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_NOTHROW(TurbineSpec{}.validate());

    FarmLayout layout{{{0.0, 0.0}, {0.0, 0.0}}};
    CHECK_THROWS_AS(layout.validate(), std::invalid_argument);
    CHECK_THROWS_AS(FarmLayout{}.validate(), std::invalid_argument);
    CHECK_NOTHROW(FarmLayout::row(3, 891.5).validate());
}

TEST_CASE("yaw envelope") {
    CHECK(YawState{{10.0, -45.0}}.within_envelope());
    CHECK_FALSE(YawState{{46.0}}.within_envelope());
}
