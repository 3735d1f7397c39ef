#include "wakelab/delay_model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace wakelab;
using Catch::Approx;

namespace {

// Independent projection: propagation unit vector from the meteorological angle.
double projected_delay(Point2 from, Point2 to, double wd, double u) {
    const double theta = (270.0 - wd) / 180.0 * 3.14159265358979323846;
    const double s = (to.x - from.x) * std::cos(theta) + (to.y - from.y) * std::sin(theta);
    return s > 0.0 ? s / u : 0.0;
}

YawHistory constant_history(std::size_t n, double value) {
    YawHistory h;
    h.record(0.0, std::vector<double>(n, value));
    return h;
}

} // namespace

TEST_CASE("two turbines five diameters apart") {
    const FarmLayout layout{{{0.0, 0.0}, {891.5, 0.0}}};
    const DelayMatrix dm = compute_delay_matrix(layout, {10.0, 270.0, 0.07}, 5.0);
    CHECK(dm.delay(0, 1) == Approx(89.15).epsilon(1e-12));
    CHECK(dm.step(0, 1) == 18);
    CHECK(dm.delay(0, 0) == 0.0);
    CHECK(dm.delay(1, 1) == 0.0);
    CHECK(dm.delay(1, 0) == 0.0);
    CHECK(dm.step(1, 0) == 0);
}

TEST_CASE("zero advection speed is rejected") {
    const FarmLayout layout = FarmLayout::row(2, 891.5);
    CHECK_THROWS_AS(compute_delay_matrix(layout, {0.0, 270.0, 0.07}, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(compute_delay_matrix(layout, {-3.0, 270.0, 0.07}, 5.0), std::invalid_argument);
}

TEST_CASE("delays agree with a scalar projection on random layouts") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(-3000.0, 3000.0), wd(0.0, 360.0), u(3.0, 20.0);
    std::uniform_int_distribution<int> count(1, 8);
    for (int trial = 0; trial < 100; ++trial) {
        FarmLayout layout;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) layout.positions.push_back({pos(rng), pos(rng)});
        const InflowState inflow{u(rng), wd(rng), 0.07};
        const DelayMatrix dm = compute_delay_matrix(layout, inflow, 5.0);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double ref = projected_delay(layout.positions[j], layout.positions[i], inflow.wind_direction,
                                                   inflow.wind_speed);
                CHECK(std::abs(dm.delay(j, i) - ref) <= 1e-9);
                CHECK(dm.step(j, i) == std::lround(ref / 5.0));
                CHECK(dm.delay(j, i) >= 0.0);
            }
    }
}

TEST_CASE("delay matrix is rotation invariant") {
    const FarmLayout layout{{{0.0, 0.0}, {891.5, 120.0}, {1800.0, -60.0}}};
    const DelayMatrix a = compute_delay_matrix(layout, {10.0, 268.0, 0.07}, 5.0);
    const double r = 0.7;
    FarmLayout turned = layout;
    for (auto& p : turned.positions) p = {p.x * std::cos(r) - p.y * std::sin(r), p.x * std::sin(r) + p.y * std::cos(r)};
    const DelayMatrix b = compute_delay_matrix(turned, {10.0, 268.0 - r * 180.0 / 3.14159265358979323846, 0.07}, 5.0);
    for (std::size_t k = 0; k < a.delays.size(); ++k) {
        CHECK(b.delays[k] == Approx(a.delays[k]).margin(1e-9));
        CHECK(b.steps[k] == a.steps[k]);
    }
}

TEST_CASE("yaw history is a zero-order hold with a floor") {
    YawHistory h;
    h.record(0.0, std::vector<double>{1.0});
    h.record(5.0, std::vector<double>{2.0});
    h.record(10.0, std::vector<double>{3.0});
    CHECK(h.at(-100.0)[0] == 1.0);
    CHECK(h.at(0.0)[0] == 1.0);
    CHECK(h.at(4.999)[0] == 1.0);
    CHECK(h.at(5.0)[0] == 2.0);
    CHECK(h.at(1e9)[0] == 3.0);
    CHECK_THROWS_AS(h.record(10.0, std::vector<double>{4.0}), std::invalid_argument);
}

TEST_CASE("effective yaws") {
    const FarmLayout layout = FarmLayout::row(3, 891.5);
    const DelayMatrix dm = compute_delay_matrix(layout, {10.0, 270.0, 0.07}, 5.0);

    SECTION("zero delays return the current yaws") {
        const DelayMatrix none = compute_delay_matrix(layout, {10.0, 0.0, 0.07}, 5.0); // crosswind row
        YawHistory h;
        h.record(0.0, std::vector<double>{1.0, 2.0, 3.0});
        h.record(50.0, std::vector<double>{4.0, 5.0, 6.0});
        CHECK(effective_yaws(h, none, 2, 10) == std::vector<double>{4.0, 5.0, 6.0});
    }
    SECTION("constant history") {
        const YawHistory h = constant_history(3, 7.5);
        for (std::size_t t = 0; t < 3; ++t) CHECK(effective_yaws(h, dm, t, 3) == std::vector<double>(3, 7.5));
    }
    SECTION("step history seen before the delay has elapsed") {
        YawHistory h;
        h.record(-1000.0, std::vector<double>{0.0, 0.0, 0.0});
        h.record(0.0, std::vector<double>{20.0, 0.0, 0.0});
        REQUIRE(dm.step(0, 1) == 18);
        CHECK(effective_yaws(h, dm, 1, 10)[0] == 0.0);
        CHECK(effective_yaws(h, dm, 1, 18)[0] == 20.0);
        CHECK(effective_yaws(h, dm, 0, 10)[0] == 20.0);
    }
}

TEST_CASE("horizon power without delays equals static evaluation") {
    const Farm farm = Farm::uniform_row(3, 5.0);
    const InflowState inflow{10.0, 270.0, 0.07};
    const double dt = 2000.0; // every delay rounds to zero steps
    REQUIRE(compute_delay_matrix(farm.layout, inflow, dt).max_step() == 0);
    const YawHistory h = constant_history(3, 0.0);
    StepMatrix plan(6, 3);
    for (std::size_t k = 0; k < 6; ++k) {
        plan(k, 0) = 5.0 * k;
        plan(k, 1) = -3.0 * k;
        plan(k, 2) = 1.0;
    }
    const StepMatrix p = horizon_power(farm, inflow, h, plan, 0.0, dt);
    for (std::size_t k = 0; k < 6; ++k) {
        const auto ev = evaluate_farm(farm, inflow, plan.row(k));
        for (std::size_t i = 0; i < 3; ++i) CHECK(p(k, i) == ev.powers[i]);
    }
}

TEST_CASE("single turbine power ignores nothing but itself") {
    const Farm farm = Farm::uniform_row(1, 5.0);
    StepMatrix plan(4, 1, 10.0);
    const StepMatrix p = horizon_power(farm, {10.0, 270.0, 0.07}, constant_history(1, 0.0), plan, 0.0, 5.0);
    for (std::size_t k = 0; k < 4; ++k) CHECK(p(k, 0) == turbine_power(TurbineSpec{}, 10.0, 10.0));
}

TEST_CASE("a yaw step reaches the downstream rotor after the advection delay") {
    const Farm farm = Farm::uniform_row(2, 5.0);
    const InflowState inflow{10.0, 270.0, 0.07};
    YawHistory moved;
    moved.record(-1000.0, std::vector<double>{0.0, 0.0});
    moved.record(0.0, std::vector<double>{25.0, 0.0});
    const YawHistory still = constant_history(2, 0.0);
    StepMatrix plan_moved(40, 2), plan_still(40, 2);
    for (std::size_t k = 0; k < 40; ++k) plan_moved(k, 0) = 25.0;
    const StepMatrix a = horizon_power(farm, inflow, moved, plan_moved, 0.0, 5.0);
    const StepMatrix b = horizon_power(farm, inflow, still, plan_still, 0.0, 5.0);
    for (std::size_t r = 0; r < 40; ++r) {
        const int k = static_cast<int>(r) + 1;
        if (k < 18)
            CHECK(a(r, 1) == b(r, 1));
        else
            CHECK(a(r, 1) != b(r, 1));
    }
}

TEST_CASE("planned yaws never influence earlier steps") {
    const Farm farm = Farm::uniform_row(3, 4.0);
    const InflowState inflow{8.0, 273.0, 0.07};
    const YawHistory h = constant_history(3, 5.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> yaw(-30.0, 30.0);
    StepMatrix plan(60, 3);
    for (auto& v : plan.data) v = yaw(rng);
    const StepMatrix base = horizon_power(farm, inflow, h, plan, 100.0, 5.0);
    for (std::size_t cut : {0u, 7u, 25u, 50u}) {
        StepMatrix changed = plan;
        for (std::size_t r = cut + 1; r < 60; ++r)
            for (std::size_t i = 0; i < 3; ++i) changed(r, i) = yaw(rng);
        const StepMatrix p = horizon_power(farm, inflow, h, changed, 100.0, 5.0);
        for (std::size_t r = 0; r <= cut; ++r)
            for (std::size_t i = 0; i < 3; ++i) CHECK(p(r, i) == base(r, i));
    }
}
