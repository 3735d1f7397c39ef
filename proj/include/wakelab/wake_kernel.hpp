// Steady Gaussian wake kernel with yaw deflection and root-sum-square superposition.
#pragma once

#include "farm_core.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace wakelab {

struct WakeParams {
    double k_a = 0.3837;   ///< TI slope of wake expansion
    double k_b = 0.003678; ///< expansion offset
    double deflection_gain = 1.0;

    double expansion(double ti) const { return k_a * ti + k_b; }
};

/// Everything needed to evaluate the steady flow: geometry, machines, kernel constants.
struct Farm {
    FarmLayout layout;
    std::vector<TurbineSpec> turbines;
    WakeParams wake;

    std::size_t size() const { return layout.size(); }

    void validate() const {
        layout.validate();
        if (turbines.size() != layout.size())
            throw std::invalid_argument("farm needs one turbine spec per layout position");
        for (const auto& t : turbines) t.validate();
    }

    static Farm uniform_row(std::size_t n, double spacing_diameters, const TurbineSpec& spec = {}) {
        return {FarmLayout::row(n, spacing_diameters * spec.rotor_diameter), std::vector<TurbineSpec>(n, spec), {}};
    }
};

struct FlowEvaluation {
    std::vector<double> effective_speeds;
    std::vector<double> powers;
    double total_power = 0.0;
};

/**
 * Lateral wake-centre offset [m] at a distance behind a yawed rotor.
 *
 * Initial skew xi0 = gain * (ct/2) * sin(g) * cos^2(g), decaying as
 * xi0 / (1 + 2 k x / D)^2; the offset is the closed-form integral of that skew.
 */
inline double wake_deflection(double ct, double yaw_deg, double downstream_distance, double rotor_diameter,
                              double k_star, double deflection_gain = 1.0) {
    if (downstream_distance <= 0.0) return 0.0;
    const double g = deg2rad(yaw_deg);
    const double cg = std::cos(g);
    const double xi0 = deflection_gain * 0.5 * ct * std::sin(g) * cg * cg;
    const double growth = 2.0 * k_star * downstream_distance / rotor_diameter;
    return xi0 * rotor_diameter / (2.0 * k_star) * (1.0 - 1.0 / (1.0 + growth));
}

/// Fractional velocity deficit produced by one yawed rotor at a relative position in its flow frame.
inline double wake_deficit(const TurbineSpec& source, double yaw_deg, double dx, double dy, double k_star,
                           double deflection_gain, double centre_shift = 0.0) {
    if (dx <= 0.0) return 0.0;
    const double cg = std::cos(deg2rad(yaw_deg));
    const double ct = source.ct * cg * cg;
    const double root = std::sqrt(1.0 - ct);
    const double beta = 0.5 * (1.0 + root) / root;
    const double d = source.rotor_diameter;
    const double sigma_d = k_star * dx / d + 0.2 * std::sqrt(beta);
    const double amplitude = 1.0 - std::sqrt(std::max(0.0, 1.0 - ct / (8.0 * sigma_d * sigma_d)));
    const double centre = wake_deflection(source.ct, yaw_deg, dx, d, k_star, deflection_gain) + centre_shift;
    const double r = (dy - centre) / (sigma_d * d);
    return amplitude * std::exp(-0.5 * r * r);
}

/// Turbine coordinates projected onto the flow frame of one inflow direction.
struct FarmGeometry {
    std::vector<double> downstream;
    std::vector<double> lateral;

    FarmGeometry(const FarmLayout& layout, double wind_direction_deg) {
        const FlowFrame frame(wind_direction_deg);
        downstream.reserve(layout.size());
        lateral.reserve(layout.size());
        for (const auto& p : layout.positions) {
            downstream.push_back(frame.downstream(p));
            lateral.push_back(frame.lateral(p));
        }
    }

    /// Indices ordered from most upstream to most downstream (stable on ties).
    std::vector<std::size_t> upstream_order() const {
        std::vector<std::size_t> idx(downstream.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return downstream[a] < downstream[b]; });
        return idx;
    }
};

/// Free-stream speed reduced by all wakes reaching a point given in flow-frame coordinates.
/// `yaws_seen[j]` is the yaw of source j as felt at this point; `meander` (optional) shifts each wake centre.
inline double point_speed(const Farm& farm, const FarmGeometry& geom, const InflowState& inflow,
                          std::span<const double> yaws_seen, double downstream, double lateral,
                          std::span<const double> meander = {}, std::size_t skip = static_cast<std::size_t>(-1)) {
    const double k_star = farm.wake.expansion(inflow.turbulence_intensity);
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < geom.downstream.size(); ++j) {
        if (j == skip) continue;
        const double dx = downstream - geom.downstream[j];
        if (dx <= 0.0) continue;
        const double shift = meander.empty() ? 0.0 : meander[j];
        const double def = wake_deficit(farm.turbines[j], yaws_seen[j], dx, lateral - geom.lateral[j], k_star,
                                        farm.wake.deflection_gain, shift);
        sum_sq += def * def;
    }
    return std::max(0.0, inflow.wind_speed * (1.0 - std::sqrt(sum_sq)));
}

/// Rotor-centre speed of one target turbine.
inline double rotor_speed(const Farm& farm, const FarmGeometry& geom, const InflowState& inflow,
                          std::span<const double> yaws_seen, std::size_t target,
                          std::span<const double> meander = {}) {
    return point_speed(farm, geom, inflow, yaws_seen, geom.downstream[target], geom.lateral[target], meander,
                       target);
}

inline void check_inflow(const InflowState& inflow) {
    if (!inflow.is_finite()) throw std::invalid_argument("inflow state contains non-finite values");
}

/// Steady farm evaluation: every turbine sees every upstream yaw as given.
inline FlowEvaluation evaluate_farm(const Farm& farm, const InflowState& inflow, std::span<const double> yaws,
                                    std::span<const double> meander = {}) {
    check_inflow(inflow);
    if (yaws.size() != farm.size()) throw std::invalid_argument("yaw vector length must equal turbine count");
    const FarmGeometry geom(farm.layout, inflow.wind_direction);
    FlowEvaluation out;
    out.effective_speeds.resize(farm.size());
    out.powers.resize(farm.size());
    for (std::size_t i : geom.upstream_order()) {
        out.effective_speeds[i] = rotor_speed(farm, geom, inflow, yaws, i, meander);
        out.powers[i] = turbine_power(farm.turbines[i], out.effective_speeds[i], yaws[i]);
    }
    // Summed in index order so relabelled farms give bitwise comparable totals per turbine.
    for (double p : out.powers) out.total_power += p;
    return out;
}

/// Hub-height speed on a regular x-y grid, written as CSV rows (x, y, speed).
inline void write_flow_slice(std::ostream& os, const Farm& farm, const InflowState& inflow,
                             std::span<const double> yaws, double x_min, double x_max, double y_min, double y_max,
                             std::size_t nx, std::size_t ny) {
    check_inflow(inflow);
    if (nx < 2 || ny < 2) throw std::invalid_argument("flow slice needs at least 2 points per axis");
    const FarmGeometry geom(farm.layout, inflow.wind_direction);
    const FlowFrame frame(inflow.wind_direction);
    os << "x,y,speed\n";
    os.precision(10);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        const double y = y_min + (y_max - y_min) * static_cast<double>(iy) / static_cast<double>(ny - 1);
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double x = x_min + (x_max - x_min) * static_cast<double>(ix) / static_cast<double>(nx - 1);
            const Point2 p{x, y};
            os << x << ',' << y << ','
               << point_speed(farm, geom, inflow, yaws, frame.downstream(p), frame.lateral(p)) << '\n';
        }
    }
}

} // namespace wakelab
