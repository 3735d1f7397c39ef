// Farm geometry, inflow conventions and analytic turbine curves.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace wakelab {

inline constexpr double kAirDensity = 1.225; // [kg/m^3]

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/**
 * @brief Analytic region-II turbine model.
 *
 * Constant power and thrust coefficients below rated, hard clip at rated power.
 * Defaults approximate a 10 MW reference machine (D = 178.3 m).
 */
struct TurbineSpec {
    double rotor_diameter = 178.3;  ///< [m]
    double hub_height = 119.0;      ///< [m]
    double rated_power = 10.0e6;    ///< [W]
    double rated_wind_speed = 11.4; ///< [m/s]
    double cp = 0.47;
    double ct = 0.80;
    double cos_exponent = 1.88; ///< yaw power loss P ~ cos(gamma)^p

    void validate() const {
        if (!(rotor_diameter > 0.0)) throw std::invalid_argument("turbine.rotor_diameter must be > 0");
        if (!(cp > 0.0 && cp < 16.0 / 27.0)) throw std::invalid_argument("turbine.cp must lie in (0, 16/27)");
        if (!(ct > 0.0 && ct < 1.0)) throw std::invalid_argument("turbine.ct must lie in (0, 1)");
        if (!(rated_power > 0.0)) throw std::invalid_argument("turbine.rated_power must be > 0");
    }

    double rotor_area() const { return std::numbers::pi * rotor_diameter * rotor_diameter / 4.0; }
};

struct Point2 {
    double x = 0.0; ///< east [m]
    double y = 0.0; ///< north [m]
};

/// Turbine positions in a fixed ground frame (x east, y north).
struct FarmLayout {
    std::vector<Point2> positions;

    std::size_t size() const { return positions.size(); }

    void validate() const {
        if (positions.empty()) throw std::invalid_argument("layout must contain at least one turbine");
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (!std::isfinite(positions[i].x) || !std::isfinite(positions[i].y))
                throw std::invalid_argument("layout position " + std::to_string(i) + " is not finite");
            for (std::size_t j = i + 1; j < positions.size(); ++j) {
                if (positions[i].x == positions[j].x && positions[i].y == positions[j].y)
                    throw std::invalid_argument("layout positions " + std::to_string(i) + " and " +
                                                std::to_string(j) + " coincide");
            }
        }
    }

    /// Straight west-east row with the given spacing [m].
    static FarmLayout row(std::size_t n, double spacing) {
        FarmLayout layout;
        for (std::size_t i = 0; i < n; ++i) layout.positions.push_back({static_cast<double>(i) * spacing, 0.0});
        return layout;
    }
};

/// Free-stream state; also the tuple the MPC consumes as its estimate.
struct InflowState {
    double wind_speed = 10.0;           ///< [m/s]
    double wind_direction = 270.0;      ///< meteorological, direction wind comes FROM [deg]
    double turbulence_intensity = 0.07; ///< fraction

    bool is_finite() const {
        return std::isfinite(wind_speed) && std::isfinite(wind_direction) && std::isfinite(turbulence_intensity);
    }
};

inline constexpr double kYawEnvelope = 45.0; // hard actuator limit [deg]

/// Per-turbine yaw misalignment [deg], positive counterclockwise seen from above.
struct YawState {
    std::vector<double> offsets;

    static YawState zeros(std::size_t n) { return {std::vector<double>(n, 0.0)}; }

    bool within_envelope() const {
        return std::all_of(offsets.begin(), offsets.end(), [](double g) { return std::abs(g) <= kYawEnvelope; });
    }
};

/// Wraps an angle in degrees into [0, 360).
inline double wrap_degrees(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    return w >= 360.0 ? 0.0 : w;
}

/// Propagation angle of the flow in the ground frame; 270 deg (westerly) flows along +x.
inline double flow_angle(double wind_direction_deg) { return deg2rad(270.0 - wind_direction_deg); }

/// Unit vector along the flow and its counterclockwise normal.
struct FlowFrame {
    double c = 1.0;
    double s = 0.0;

    explicit FlowFrame(double wind_direction_deg) {
        const double theta = flow_angle(wind_direction_deg);
        c = std::cos(theta);
        s = std::sin(theta);
    }

    double downstream(Point2 p) const { return p.x * c + p.y * s; }
    double lateral(Point2 p) const { return -p.x * s + p.y * c; }
};

inline double turbine_power(const TurbineSpec& spec, double effective_speed, double yaw_deg) {
    if (effective_speed <= 0.0) return 0.0;
    const double yaw_factor = std::pow(std::abs(std::cos(deg2rad(yaw_deg))), spec.cos_exponent);
    const double aero = 0.5 * kAirDensity * spec.rotor_area() * spec.cp * effective_speed * effective_speed *
                        effective_speed * yaw_factor;
    return std::min(aero, spec.rated_power);
}

} // namespace wakelab
